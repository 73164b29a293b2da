#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mrolab/config.hpp"
#include "mrolab/ho_events.hpp"
#include "mrolab/ho_record.hpp"
#include "mrolab/random.hpp"

namespace mrolab::radio {

struct Position {
  double x = 0.0;
  double y = 0.0;
};

struct A3Config {
  double off_db = 3.0;
  double hys_db = 1.0;
  double ttt_ms = 160.0;

  void validate() const;
};

struct Cell {
  int id = 0;
  Position position;
  double tx_power_dbm = 30.0;
  double carrier_mhz = 3500.0;
  std::optional<double> azimuth_deg;  // empty for omni cells
};

struct Bounds {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  bool contains(Position p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
};

// Cells plus the Cell Individual Offset table. Only the ordered tunable pair
// (A,B) may carry a non-zero CIO and it is confined to [-8, +8] dB.
class CellLayout {
 public:
  CellLayout(std::vector<Cell> cells, int source, int target, double margin_m);

  // cols x rows grid of omni cells, `spacing_m` apart; tunable pair is the
  // first two cells of the bottom row.
  static CellLayout grid(int cols, int rows, double spacing_m, double tx_power_dbm, double carrier_mhz);
  // 7 three-sector sites; tunable pair is sector 1 -> sector 2 of the center site.
  static CellLayout hexagonal(double isd_m, double tx_power_dbm, double carrier_mhz);

  const std::vector<Cell>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }
  std::size_t index_of(int cell_id) const;
  const Cell& cell(int cell_id) const { return cells_[index_of(cell_id)]; }
  int source() const { return source_; }
  int target() const { return target_; }
  const Bounds& bounds() const { return bounds_; }

  double cio(int from_id, int to_id) const;
  int tunable_cio() const { return cio_; }
  void set_tunable_cio(int cio);

 private:
  std::vector<Cell> cells_;
  int source_ = 0;
  int target_ = 0;
  int cio_ = 0;
  Bounds bounds_;
};

struct PropagationConfig {
  double pathloss_exponent = 3.7;
  double intercept_db = 38.0;  // path loss at 1 m
  double shadowing_sigma_db = 4.0;
  double decorrelation_m = 50.0;
  double antenna_beamwidth_deg = 70.0;
  double antenna_max_attenuation_db = 20.0;
};

double path_loss_db(double distance_m, const PropagationConfig& prop);
double antenna_gain_db(const Cell& cell, Position ue, const PropagationConfig& prop);
// tx power - path loss + antenna gain + shadowing. Throws for an unknown cell.
double rsrp(const CellLayout& layout, int cell_id, Position ue, double shadowing_db, const PropagationConfig& prop);

enum class Mobility { kStraight, kWaypoint };

// Static radio and traffic model shared by all scenarios.
struct RadioConfig {
  std::string layout = "grid";  // grid | hex
  int grid_cols = 2;
  int grid_rows = 2;
  double isd_m = 300.0;
  double tx_power_dbm = 30.0;
  double carrier_mhz = 3500.0;
  PropagationConfig propagation;
  A3Config a3;
  double sample_period_ms = 40.0;
  double l3_filter_coeff = 0.5;
  double ho_prep_ms = 50.0;
  double ho_exec_ms = 30.0;
  double access_threshold_dbm = -95.0;
  double max_arrival_rate = 40.0;  // UE/s at load 1
  double mean_session_s = 60.0;
  double stationary_fraction = 0.5;
  Mobility mobility = Mobility::kStraight;
  double warmup_s = 90.0;

  CellLayout make_layout() const;
  void validate() const;
  static RadioConfig from_config(const KeyValueConfig& cfg);
};

// One simulated traffic condition.
struct ScenarioConfig {
  double load = 0.6;
  double velocity_kmh = 50.0;
  std::uint64_t seed = 1;
  double window_seconds = 60.0;
  int horizon = 17;
  double rlf_threshold_dbm = -98.0;
  double rlf_timer_ms = 400.0;
  double reestablish_delay_ms = 300.0;
  double short_stay_window_s = 1.0;

  std::string id() const;
  void validate() const;
  static ScenarioConfig from_config(const KeyValueConfig& cfg);
};

struct WindowResult {
  events::HoCounters counters;
  std::vector<events::LabeledRecord> labeled;
};

// Sample-stepped multi-UE world. Every random draw comes from generators
// seeded by (scenario seed, stream id), so a world is fully reproducible.
class World {
 public:
  World(RadioConfig radio, ScenarioConfig scenario, std::uint64_t stream = 0);
  ~World();
  World(World&&) noexcept;
  World& operator=(World&&) noexcept;

  const CellLayout& layout() const;
  const RadioConfig& radio() const;
  const ScenarioConfig& scenario() const;
  double now() const;
  std::size_t ue_count() const;

  int cio() const;
  void set_cio(int cio);

  void set_arrivals_enabled(bool enabled);
  void set_shadowing_enabled(bool enabled);
  // Adds a UE that moves with constant velocity from `start`; it leaves when
  // it exits the bounds or after `lifetime_s`. Returns the UE id.
  std::uint64_t add_ue(Position start, Position velocity_mps, double lifetime_s);
  std::optional<Position> ue_position(std::uint64_t id) const;
  std::optional<int> serving_cell(std::uint64_t id) const;

  // Moves time forward by dt_s (> 0) and returns the records completed in it.
  std::vector<HoRecord> advance(double dt_s);

  // Runs warm-up traffic; records produced before the first window are
  // dropped except for the classification look-back tail.
  void warm_up();

  // Sets the tunable CIO, advances one decision window and returns the
  // counters of the records that became final in it. The last
  // short_stay_window + reestablish_delay seconds stay buffered so their
  // follow-up events can be seen in the next window.
  WindowResult run_window(int cio);

  // A3 trigger positions of handovers started since construction (UE id, source, target, position).
  struct TriggerEvent {
    std::uint64_t ue;
    int source;
    int target;
    Position position;
    double time_s;
  };
  const std::vector<TriggerEvent>& triggers() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mrolab::radio
