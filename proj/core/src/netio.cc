#include "lurenet/netio.h"

#include <algorithm>
#include <cstring>
#include <thread>

namespace lurenet {

namespace {

constexpr uint8_t kMagic[4] = {'L', 'N', 'C', '1'};

void put_u16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(Bytes& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t get_u32(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

uint64_t bits_of(double d) {
  uint64_t u;
  std::memcpy(&u, &d, sizeof u);
  return u;
}

double from_bits(uint64_t u) {
  double d;
  std::memcpy(&d, &u, sizeof d);
  return d;
}

void check_header(const uint8_t* h) {
  if (std::memcmp(h, kMagic, 4) != 0) throw MalformedFrame("bad magic");
  if (h[4] != kFrameVersion) {
    throw MalformedFrame("unsupported version " + std::to_string(h[4]));
  }
  if (h[5] > static_cast<uint8_t>(FrameKind::kAck)) {
    throw MalformedFrame("unknown frame kind " + std::to_string(h[5]));
  }
  if (get_u16(h + 15) > kMaxPayload) {
    throw MalformedFrame("payload too long");
  }
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

bool blown_up(const Vector& v, double limit) {
  return !v.allFinite() || v.norm() > limit;
}

const char* kind_name(FrameKind k) {
  switch (k) {
    case FrameKind::kSensor:
      return "SENSOR";
    case FrameKind::kControl:
      return "CONTROL";
    case FrameKind::kAck:
      return "ACK";
  }
  return "?";
}

// Frame I/O for one node with its own sequence counter.
class Endpoint {
 public:
  Endpoint(Transport& t, std::chrono::milliseconds timeout)
      : transport_(t), timeout_(timeout) {}

  void send(FrameKind kind, uint32_t t, uint8_t flags,
            std::vector<double> payload) {
    Frame f{kind, next_seq_++, t, flags, std::move(payload)};
    transport_.send(encode_frame(f));
  }

  /// nullopt on timeout; ProtocolError on an unexpected frame.
  std::optional<Frame> expect(FrameKind kind, uint32_t t, size_t len) {
    auto bytes = transport_.receive(timeout_);
    if (!bytes) return std::nullopt;
    Frame f = decode_frame(*bytes);
    if (f.kind != kind || f.t != t) {
      throw ProtocolError(std::string("expected ") + kind_name(kind) + "(" +
                          std::to_string(t) + "), got " + kind_name(f.kind) +
                          "(" + std::to_string(f.t) + ")");
    }
    if (f.payload.size() != len && !(f.flags & kFlagStop)) {
      throw ProtocolError(std::string(kind_name(kind)) + " payload has " +
                          std::to_string(f.payload.size()) +
                          " values, expected " + std::to_string(len));
    }
    return f;
  }

 private:
  Transport& transport_;
  std::chrono::milliseconds timeout_;
  uint32_t next_seq_ = 1;
};

SimConfig resolve_net(const LureSystem& sys, const NetConfig& cfg) {
  const SimConfig c = cfg.sim.resolved(sys);
  if (c.mode == LoopMode::kStateFeedback) {
    throw std::invalid_argument(
        "the networked loop supports output_feedback and open_loop only");
  }
  const size_t r = static_cast<size_t>(c.realizations);
  if ((!cfg.gamma_scripts.empty() && cfg.gamma_scripts.size() != r) ||
      (!cfg.xi_scripts.empty() && cfg.xi_scripts.size() != r)) {
    throw std::invalid_argument("need one channel script per realization");
  }
  return c;
}

template <typename Body>
NodeResult run_node(Body&& body) {
  NodeResult result;
  try {
    body(result);
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

}  // namespace

bool Frame::operator==(const Frame& o) const {
  if (kind != o.kind || seq != o.seq || t != o.t || flags != o.flags ||
      payload.size() != o.payload.size()) {
    return false;
  }
  for (size_t i = 0; i < payload.size(); ++i) {
    if (bits_of(payload[i]) != bits_of(o.payload[i])) return false;
  }
  return true;
}

Bytes encode_frame(const Frame& f) {
  if (f.payload.size() > kMaxPayload) {
    throw MalformedFrame("payload exceeds " + std::to_string(kMaxPayload) +
                         " values");
  }
  Bytes out;
  out.reserve(kFrameHeaderSize + 8 * f.payload.size());
  for (uint8_t b : kMagic) out.push_back(b);
  out.push_back(kFrameVersion);
  out.push_back(static_cast<uint8_t>(f.kind));
  put_u32(out, f.seq);
  put_u32(out, f.t);
  out.push_back(f.flags);
  put_u16(out, static_cast<uint16_t>(f.payload.size()));
  for (double v : f.payload) put_u64(out, bits_of(v));
  return out;
}

size_t frame_length_from_header(const uint8_t* header) {
  check_header(header);
  return kFrameHeaderSize + 8 * static_cast<size_t>(get_u16(header + 15));
}

Frame decode_frame(const uint8_t* data, size_t size) {
  if (size < kFrameHeaderSize) {
    throw MalformedFrame("short buffer: " + std::to_string(size) + " bytes");
  }
  const size_t expected = frame_length_from_header(data);
  if (size != expected) {
    throw MalformedFrame("length mismatch: header announces " +
                         std::to_string(expected) + " bytes, got " +
                         std::to_string(size));
  }
  Frame f;
  f.kind = static_cast<FrameKind>(data[5]);
  f.seq = get_u32(data + 6);
  f.t = get_u32(data + 10);
  f.flags = data[14];
  const size_t n = get_u16(data + 15);
  f.payload.resize(n);
  for (size_t i = 0; i < n; ++i) {
    f.payload[i] = from_bits(get_u64(data + kFrameHeaderSize + 8 * i));
  }
  return f;
}

Frame decode_frame(const Bytes& bytes) {
  return decode_frame(bytes.data(), bytes.size());
}

LossInjector LossInjector::Bernoulli(double p, uint64_t seed,
                                     uint64_t realization, StreamId id) {
  return LossInjector(ChannelSource::Seeded(p, seed, realization, id));
}

LossInjector LossInjector::Scripted(std::vector<uint8_t> bits) {
  return LossInjector(ChannelSource::Scripted(std::move(bits)));
}

NodeResult run_plant_node(const LureSystem& sys, Transport& transport,
                          const NetConfig& cfg) {
  const SimConfig c = resolve_net(sys, cfg);
  const int n = sys.n();
  const int m = sys.m();
  return run_node([&](NodeResult& result) {
    Endpoint ep(transport, cfg.round_timeout);
    for (int r = 0; r < c.realizations; ++r) {
      const auto ur = static_cast<uint64_t>(r);
      LossInjector gamma_inj =
          cfg.gamma_scripts.empty()
              ? LossInjector::Bernoulli(c.p, c.seed, ur,
                                        StreamId::kInputChannel)
              : LossInjector::Scripted(cfg.gamma_scripts[ur]);
      GaussianNoise noise(c.noise_variance, c.seed, ur);
      result.runs.emplace_back();
      RealizationTrace& run = result.runs.back();
      run.x.push_back(c.x0);
      for (int t = 0; t < c.horizon; ++t) {
        const auto ut = static_cast<uint32_t>(t);
        const Vector& x = run.x.back();
        ep.send(FrameKind::kSensor, ut, 0, to_std(sys.C * x));
        const auto control = ep.expect(FrameKind::kControl, ut, m);
        if (!control) {
          result.timed_out = true;
          return;
        }
        if (control->flags & kFlagStop) {
          run.diverged = true;
          break;
        }
        const bool gamma = gamma_inj.deliver();
        const Vector w = noise.sample(n);
        Vector next = plant_step(sys, x, gamma, to_vector(control->payload), w);
        const bool diverged = blown_up(next, c.divergence_norm);
        run.gamma.push_back(gamma ? 1 : 0);
        run.x.push_back(std::move(next));
        ep.send(FrameKind::kAck, ut,
                static_cast<uint8_t>((gamma ? kFlagDelivered : 0) |
                                     (diverged ? kFlagStop : 0)),
                {});
        if (diverged) {
          run.diverged = true;
          break;
        }
      }
    }
  });
}

NodeResult run_controller_node(const LureSystem& model, const LoopGains& gains,
                               Transport& transport, const NetConfig& cfg) {
  const SimConfig c = resolve_net(model, cfg);
  const int m = model.m();
  if (c.mode == LoopMode::kOutputFeedback &&
      (gains.K.rows() != m || gains.K.cols() != model.n())) {
    throw DimensionMismatch("K must be M x N");
  }
  if (gains.L.size() != 0 &&
      (gains.L.rows() != model.n() || gains.L.cols() != m)) {
    throw DimensionMismatch("L must be N x M");
  }
  return run_node([&](NodeResult& result) {
    Endpoint ep(transport, cfg.round_timeout);
    for (int r = 0; r < c.realizations; ++r) {
      const auto ur = static_cast<uint64_t>(r);
      LossInjector xi_inj =
          cfg.xi_scripts.empty()
              ? LossInjector::Bernoulli(c.q, c.seed, ur,
                                        StreamId::kOutputChannel)
              : LossInjector::Scripted(cfg.xi_scripts[ur]);
      result.runs.emplace_back();
      RealizationTrace& run = result.runs.back();
      run.xhat.push_back(c.xhat0);
      Vector u_prev;
      Vector y_prev;
      bool xi_prev = false;
      for (int t = 0; t <= c.horizon; ++t) {
        const auto ut = static_cast<uint32_t>(t);
        if (t > 0) {
          const auto ack = ep.expect(FrameKind::kAck, ut - 1, 0);
          if (!ack) {
            result.timed_out = true;
            return;
          }
          const bool gamma = ack->flags & kFlagDelivered;
          run.gamma.push_back(gamma ? 1 : 0);
          Vector next = observer_step(model, gains.L, run.xhat.back(), gamma,
                                      u_prev, xi_prev, y_prev);
          const bool diverged = blown_up(next, c.divergence_norm);
          run.xhat.push_back(std::move(next));
          if (ack->flags & kFlagStop) {
            run.diverged = true;
            break;
          }
          if (diverged) {
            run.diverged = true;
            if (t < c.horizon) {
              if (!ep.expect(FrameKind::kSensor, ut, m)) {
                result.timed_out = true;
                return;
              }
              ep.send(FrameKind::kControl, ut, kFlagStop, {});
            }
            break;
          }
        }
        if (t == c.horizon) break;
        const auto sensor = ep.expect(FrameKind::kSensor, ut, m);
        if (!sensor) {
          result.timed_out = true;
          return;
        }
        xi_prev = xi_inj.deliver();
        run.xi.push_back(xi_prev ? 1 : 0);
        y_prev = to_vector(sensor->payload);
        const Vector& xhat = run.xhat.back();
        u_prev = control_law(gains, c.mode, xhat, xhat, m);
        ep.send(FrameKind::kControl, ut, 0, to_std(u_prev));
      }
    }
  });
}

TraceSet merge_node_traces(const LureSystem& sys, const NetConfig& cfg,
                           const NodeResult& plant,
                           const NodeResult& controller) {
  SimConfig c = cfg.sim.resolved(sys);
  const size_t count = std::min(plant.runs.size(), controller.runs.size());
  if (count == 0) throw ProtocolError("no realization completed");
  std::vector<RealizationTrace> runs(count);
  for (size_t r = 0; r < count; ++r) {
    const RealizationTrace& p = plant.runs[r];
    const RealizationTrace& k = controller.runs[r];
    const size_t len = std::min(p.x.size(), k.xhat.size());
    const size_t steps = std::min({len - 1, p.gamma.size(), k.xi.size()});
    RealizationTrace& out = runs[r];
    out.x.assign(p.x.begin(), p.x.begin() + static_cast<long>(steps + 1));
    out.xhat.assign(k.xhat.begin(), k.xhat.begin() + static_cast<long>(steps + 1));
    out.gamma.assign(p.gamma.begin(), p.gamma.begin() + static_cast<long>(steps));
    out.xi.assign(k.xi.begin(), k.xi.begin() + static_cast<long>(steps));
    out.diverged = p.diverged || k.diverged;
  }
  c.realizations = static_cast<int>(count);
  return assemble_traces(c, std::move(runs));
}

TraceSet run_loopback(const LureSystem& sys, const LoopGains& gains,
                      const NetConfig& cfg) {
  auto [plant_end, ctrl_end] = make_memory_pair();
  NodeResult plant;
  std::thread plant_thread([&, end = std::move(plant_end)]() mutable {
    try {
      plant = run_plant_node(sys, *end, cfg);
    } catch (const std::exception& e) {
      plant.error = e.what();
    }
    end.reset();
  });
  NodeResult ctrl;
  try {
    ctrl = run_controller_node(sys, gains, *ctrl_end, cfg);
  } catch (...) {
    ctrl_end.reset();
    plant_thread.join();
    throw;
  }
  ctrl_end.reset();
  plant_thread.join();
  if (!plant.complete() || !ctrl.complete()) {
    throw ProtocolError("networked run incomplete: plant '" + plant.error +
                        "', controller '" + ctrl.error + "'" +
                        (plant.timed_out || ctrl.timed_out ? " (timeout)" : ""));
  }
  return merge_node_traces(sys, cfg, plant, ctrl);
}

}  // namespace lurenet
