#pragma once

// Two-node networked loop: a plant node and a controller/observer node
// exchange frames in lock-step rounds.
//
// Round t:
//   plant      -> SENSOR(t, y[t])
//   controller:  finalize xhat[t] from ACK(t-1), receive SENSOR through the
//                xi injector, send CONTROL(t, K xhat[t])
//   plant      :  receive CONTROL through the gamma injector, step, send
//                 ACK(t, gamma[t])
// The controller consumes the last ACK after the final round.
//
// Wire format, little-endian:
//   0  magic "LNC1"   4  version (1)   5  kind   6  seq u32   10  t u32
//   14 flags u8       15 payload_len u16 (count of doubles)    17 payload

#include <chrono>
#include <cstdint>
#include <vector>

#include "lurenet/errors.h"
#include "lurenet/model.h"
#include "lurenet/rng.h"
#include "lurenet/sim.h"
#include "lurenet/transport.h"

namespace lurenet {

enum class FrameKind : uint8_t { kSensor = 0, kControl = 1, kAck = 2 };

inline constexpr size_t kFrameHeaderSize = 17;
inline constexpr size_t kMaxPayload = 4096;
inline constexpr uint8_t kFrameVersion = 1;

// ACK: bit0 gamma delivered, bit1 plant diverged.
// CONTROL: bit1 controller aborts (observer diverged).
inline constexpr uint8_t kFlagDelivered = 0x01;
inline constexpr uint8_t kFlagStop = 0x02;

struct Frame {
  FrameKind kind = FrameKind::kSensor;
  uint32_t seq = 0;
  uint32_t t = 0;
  uint8_t flags = 0;
  std::vector<double> payload;

  /// Payload compared bitwise (NaN payloads compare equal to themselves).
  bool operator==(const Frame& other) const;
};

class MalformedFrame : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Throws MalformedFrame if the payload exceeds kMaxPayload.
Bytes encode_frame(const Frame& f);

/// Throws MalformedFrame on short buffers, bad magic/version/kind or a
/// length that disagrees with payload_len.
Frame decode_frame(const uint8_t* data, size_t size);
Frame decode_frame(const Bytes& bytes);

/// Total frame length announced by a header of kFrameHeaderSize bytes.
size_t frame_length_from_header(const uint8_t* header);

/// Delivery decisions of one channel, drawn at the receiving node.
class LossInjector {
 public:
  /// Same stream the in-process simulator uses for (seed, realization, id).
  static LossInjector Bernoulli(double p, uint64_t seed, uint64_t realization,
                                StreamId id);
  static LossInjector Scripted(std::vector<uint8_t> bits);

  bool deliver() { return source_.next(); }
  bool scripted() const { return source_.scripted(); }

 private:
  explicit LossInjector(ChannelSource s) : source_(std::move(s)) {}
  ChannelSource source_;
};

struct NetConfig {
  /// horizon, realizations, seed, x0, xhat0, p, q, noise_variance and
  /// divergence_norm are used; mode must be output_feedback or open_loop.
  SimConfig sim;
  std::chrono::milliseconds round_timeout{5000};
  /// Optional per-realization scripts; when non-empty they replace the
  /// Bernoulli injectors.
  std::vector<std::vector<uint8_t>> gamma_scripts;
  std::vector<std::vector<uint8_t>> xi_scripts;
};

struct NodeResult {
  /// Plant node fills x, gamma and diverged; the controller node fills xhat,
  /// xi and gamma (as acknowledged).
  std::vector<RealizationTrace> runs;
  bool timed_out = false;
  std::string error;  // transport or protocol failure, empty otherwise

  bool complete() const { return !timed_out && error.empty(); }
};

NodeResult run_plant_node(const LureSystem& sys, Transport& transport,
                          const NetConfig& cfg);

NodeResult run_controller_node(const LureSystem& model, const LoopGains& gains,
                               Transport& transport, const NetConfig& cfg);

/// Combines both halves into the simulator's TraceSet layout, truncating each
/// realization to the steps both nodes completed.
TraceSet merge_node_traces(const LureSystem& sys, const NetConfig& cfg,
                           const NodeResult& plant,
                           const NodeResult& controller);

/// Runs both nodes on an in-memory transport pair in two threads.
TraceSet run_loopback(const LureSystem& sys, const LoopGains& gains,
                      const NetConfig& cfg);

}  // namespace lurenet
