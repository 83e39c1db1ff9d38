#ifndef CRADMAP_NETSIM_HPP
#define CRADMAP_NETSIM_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cradmap/frontend.hpp"

namespace cradmap::net {

// Shared uplink. Capacity is split equally among senders that currently
// have queued data.
struct NetworkProfile {
  std::string name;
  double capacity_mbps = 100.0;
  double base_latency_ms = 0.0;
  double jitter_ms = 0.0;  // uniform half-width around the base latency
  std::vector<std::pair<std::string, std::string>> metadata;

  void validate() const;
  double min_latency_s() const { return (base_latency_ms - jitter_ms) * 1e-3; }
};

// Campus 5 GHz WiFi: 90 Mb/s single-sender upload, 8-34 ms latency.
NetworkProfile wifi_5ghz_profile();
// 5G NR band 78 (TD 3500): 110 Mb/s upload, 24 +/- 4 ms latency.
NetworkProfile five_g_band78_profile();
// Accepts "wifi-5ghz" / "wifi" and "5g-band78" / "5g".
NetworkProfile profile_by_name(std::string_view name);

// Per-robot RGB-D stream demand in Mb/s (1 Mb = 1e6 bits).
double per_robot_bandwidth(double rgb_fps, double rgb_bytes, double depth_fps,
                           double depth_bytes);

struct BandwidthTotal {
  double total_mbps = 0.0;
  bool feasible = true;
};

BandwidthTotal total_bandwidth(std::span<const double> per_robot_mbps,
                               double capacity_mbps);

// Updates per second given the effective per-robot uplink (Mb/s) and the
// data carried by one update (Mb).
double map_update_frequency(double effective_uplink_mbps, double data_per_update_mb);

// Equal share of the capacity, capped by what the robot actually demands.
double effective_uplink_per_robot(const NetworkProfile& profile, int robots,
                                  double demand_mbps);

struct Submission {
  int robot_id = 0;
  int keyframe_id = 0;
  double send_time = 0.0;  // seconds
  double payload_bits = 0.0;
};

Submission submission_for(const Keyframe& keyframe);

struct TransmissionEvent {
  int robot_id = 0;
  int keyframe_id = 0;
  double send_time = 0.0;
  double payload_bits = 0.0;
  double serialized_time = 0.0;  // last bit leaves the sender
  double arrival_time = 0.0;

  bool operator==(const TransmissionEvent&) const = default;
};

// Interval of constant allocation: every active sender receives
// rate_bps_per_sender.
struct AllocationSegment {
  double start = 0.0;
  double end = 0.0;
  std::vector<int> active_senders;
  double rate_bps_per_sender = 0.0;
};

struct Schedule {
  std::vector<TransmissionEvent> events;  // ordered by (arrival, robot, keyframe)
  std::vector<AllocationSegment> segments;
};

// Fluid processor-sharing model of the uplink. Each robot's submissions are
// served FIFO; submissions are ordered by (send_time, robot_id, keyframe_id).
Schedule simulate_channel(std::span<const Submission> submissions,
                          const NetworkProfile& profile, std::uint64_t rng_seed);

std::vector<TransmissionEvent> transmit(std::span<const Submission> submissions,
                                        const NetworkProfile& profile,
                                        std::uint64_t rng_seed);

// Accumulates keyframes as frontends emit them, then schedules the lot.
class Channel {
 public:
  Channel(NetworkProfile profile, std::uint64_t rng_seed);

  void submit(const Keyframe& keyframe) { submissions_.push_back(submission_for(keyframe)); }
  void submit(const Submission& submission) { submissions_.push_back(submission); }

  Schedule run() const;

  const NetworkProfile& profile() const { return profile_; }

 private:
  NetworkProfile profile_;
  std::uint64_t rng_seed_;
  std::vector<Submission> submissions_;
};

// Delivered updates per second per robot, measured over the window in which
// every robot is still delivering.
std::map<int, double> achieved_update_frequency(std::span<const TransmissionEvent> events);

void write_events_csv(std::ostream& out, std::span<const TransmissionEvent> events);

}  // namespace cradmap::net

#endif  // CRADMAP_NETSIM_HPP
