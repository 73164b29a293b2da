#include "mrolab/radio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mrolab/mro.hpp"

namespace mrolab::radio {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

long to_samples(double ms, double period_ms) {
  return static_cast<long>(std::ceil(ms / period_ms - 1e-9));
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void A3Config::validate() const {
  if (hys_db < 0) throw std::invalid_argument("A3Config: hysteresis must be >= 0");
  if (!(ttt_ms > 0)) throw std::invalid_argument("A3Config: time-to-trigger must be > 0");
}

// ---------------------------------------------------------------------------
// Layout

CellLayout::CellLayout(std::vector<Cell> cells, int source, int target, double margin_m)
    : cells_(std::move(cells)), source_(source), target_(target) {
  if (cells_.size() < 2) throw std::invalid_argument("CellLayout: need at least two cells");
  for (std::size_t i = 0; i < cells_.size(); ++i)
    for (std::size_t j = i + 1; j < cells_.size(); ++j)
      if (cells_[i].id == cells_[j].id) throw std::invalid_argument("CellLayout: duplicate cell id");
  if (source == target) throw std::invalid_argument("CellLayout: tunable pair must be two distinct cells");
  index_of(source);
  index_of(target);
  bounds_ = Bounds{cells_[0].position.x, cells_[0].position.x, cells_[0].position.y, cells_[0].position.y};
  for (const auto& c : cells_) {
    bounds_.x_min = std::min(bounds_.x_min, c.position.x);
    bounds_.x_max = std::max(bounds_.x_max, c.position.x);
    bounds_.y_min = std::min(bounds_.y_min, c.position.y);
    bounds_.y_max = std::max(bounds_.y_max, c.position.y);
  }
  bounds_.x_min -= margin_m;
  bounds_.x_max += margin_m;
  bounds_.y_min -= margin_m;
  bounds_.y_max += margin_m;
}

CellLayout CellLayout::grid(int cols, int rows, double spacing_m, double tx_power_dbm, double carrier_mhz) {
  if (cols < 2 || rows < 1) throw std::invalid_argument("CellLayout::grid: need at least 2 columns");
  std::vector<Cell> cells;
  int id = 1;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      cells.push_back(Cell{id++, Position{c * spacing_m, r * spacing_m}, tx_power_dbm, carrier_mhz, std::nullopt});
  return CellLayout(std::move(cells), 1, 2, spacing_m / 2.0);
}

CellLayout CellLayout::hexagonal(double isd_m, double tx_power_dbm, double carrier_mhz) {
  std::vector<Position> sites{{0.0, 0.0}};
  for (int k = 0; k < 6; ++k) {
    const double a = (30.0 + 60.0 * k) * kDegToRad;
    sites.push_back(Position{isd_m * std::cos(a), isd_m * std::sin(a)});
  }
  std::vector<Cell> cells;
  int id = 1;
  for (const auto& s : sites)
    for (double az : {30.0, 150.0, 270.0}) cells.push_back(Cell{id++, s, tx_power_dbm, carrier_mhz, az});
  return CellLayout(std::move(cells), 1, 2, isd_m / 2.0);
}

std::size_t CellLayout::index_of(int cell_id) const {
  for (std::size_t i = 0; i < cells_.size(); ++i)
    if (cells_[i].id == cell_id) return i;
  throw std::out_of_range("CellLayout: unknown cell " + std::to_string(cell_id));
}

double CellLayout::cio(int from_id, int to_id) const {
  return (from_id == source_ && to_id == target_) ? static_cast<double>(cio_) : 0.0;
}

void CellLayout::set_tunable_cio(int cio) {
  if (cio < mro::kCioMin || cio > mro::kCioMax) {
    throw std::out_of_range("CIO " + std::to_string(cio) + " dB outside [-8, +8]");
  }
  cio_ = cio;
}

// ---------------------------------------------------------------------------
// Propagation

double path_loss_db(double distance_m, const PropagationConfig& prop) {
  return prop.intercept_db + 10.0 * prop.pathloss_exponent * std::log10(std::max(distance_m, 1.0));
}

double antenna_gain_db(const Cell& cell, Position ue, const PropagationConfig& prop) {
  if (!cell.azimuth_deg) return 0.0;
  const double bearing = std::atan2(ue.y - cell.position.y, ue.x - cell.position.x) / kDegToRad;
  double off = std::fmod(bearing - *cell.azimuth_deg + 540.0, 360.0) - 180.0;
  const double ratio = off / prop.antenna_beamwidth_deg;
  return -std::min(12.0 * ratio * ratio, prop.antenna_max_attenuation_db);
}

double rsrp(const CellLayout& layout, int cell_id, Position ue, double shadowing_db, const PropagationConfig& prop) {
  const Cell& c = layout.cell(cell_id);
  const double d = std::hypot(ue.x - c.position.x, ue.y - c.position.y);
  return c.tx_power_dbm - path_loss_db(d, prop) + antenna_gain_db(c, ue, prop) + shadowing_db;
}

// ---------------------------------------------------------------------------
// Configs

CellLayout RadioConfig::make_layout() const {
  if (layout == "grid") return CellLayout::grid(grid_cols, grid_rows, isd_m, tx_power_dbm, carrier_mhz);
  if (layout == "hex") return CellLayout::hexagonal(isd_m, tx_power_dbm, carrier_mhz);
  throw std::invalid_argument("RadioConfig: unknown layout '" + layout + "'");
}

void RadioConfig::validate() const {
  a3.validate();
  if (!(isd_m > 0)) throw std::invalid_argument("RadioConfig: isd_m must be > 0");
  if (!(sample_period_ms > 0)) throw std::invalid_argument("RadioConfig: sample_period_ms must be > 0");
  if (!(l3_filter_coeff > 0 && l3_filter_coeff <= 1)) {
    throw std::invalid_argument("RadioConfig: l3_filter_coeff must lie in (0,1]");
  }
  if (ho_prep_ms < 0 || ho_exec_ms < 0) throw std::invalid_argument("RadioConfig: handover delays must be >= 0");
  if (max_arrival_rate < 0) throw std::invalid_argument("RadioConfig: max_arrival_rate must be >= 0");
  if (!(mean_session_s > 0)) throw std::invalid_argument("RadioConfig: mean_session_s must be > 0");
  if (stationary_fraction < 0 || stationary_fraction > 1) {
    throw std::invalid_argument("RadioConfig: stationary_fraction must lie in [0,1]");
  }
  if (propagation.shadowing_sigma_db < 0 || !(propagation.decorrelation_m > 0)) {
    throw std::invalid_argument("RadioConfig: invalid shadowing parameters");
  }
  if (warmup_s < 0) throw std::invalid_argument("RadioConfig: warmup_s must be >= 0");
  make_layout();
}

RadioConfig RadioConfig::from_config(const KeyValueConfig& cfg) {
  RadioConfig r;
  r.layout = cfg.get_string("radio.layout", r.layout);
  r.grid_cols = static_cast<int>(cfg.get_int("radio.grid_cols", r.grid_cols));
  r.grid_rows = static_cast<int>(cfg.get_int("radio.grid_rows", r.grid_rows));
  r.isd_m = cfg.get_double("radio.isd_m", r.isd_m);
  r.tx_power_dbm = cfg.get_double("radio.tx_power_dbm", r.tx_power_dbm);
  r.carrier_mhz = cfg.get_double("radio.carrier_mhz", r.carrier_mhz);
  auto& p = r.propagation;
  p.pathloss_exponent = cfg.get_double("radio.pathloss_exponent", p.pathloss_exponent);
  p.intercept_db = cfg.get_double("radio.pathloss_intercept_db", p.intercept_db);
  p.shadowing_sigma_db = cfg.get_double("radio.shadowing_sigma_db", p.shadowing_sigma_db);
  p.decorrelation_m = cfg.get_double("radio.shadowing_decorrelation_m", p.decorrelation_m);
  p.antenna_beamwidth_deg = cfg.get_double("radio.antenna_beamwidth_deg", p.antenna_beamwidth_deg);
  p.antenna_max_attenuation_db = cfg.get_double("radio.antenna_max_attenuation_db", p.antenna_max_attenuation_db);
  r.a3.off_db = cfg.get_double("radio.off_a3_db", r.a3.off_db);
  r.a3.hys_db = cfg.get_double("radio.hys_a3_db", r.a3.hys_db);
  r.a3.ttt_ms = cfg.get_double("radio.ttt_ms", r.a3.ttt_ms);
  r.sample_period_ms = cfg.get_double("radio.sample_period_ms", r.sample_period_ms);
  r.l3_filter_coeff = cfg.get_double("radio.l3_filter_coeff", r.l3_filter_coeff);
  r.ho_prep_ms = cfg.get_double("radio.ho_prep_ms", r.ho_prep_ms);
  r.ho_exec_ms = cfg.get_double("radio.ho_exec_ms", r.ho_exec_ms);
  r.access_threshold_dbm = cfg.get_double("radio.access_threshold_dbm", r.access_threshold_dbm);
  r.max_arrival_rate = cfg.get_double("radio.max_arrival_rate", r.max_arrival_rate);
  r.mean_session_s = cfg.get_double("radio.mean_session_s", r.mean_session_s);
  r.stationary_fraction = cfg.get_double("radio.stationary_fraction", r.stationary_fraction);
  const auto mobility = cfg.get_string("radio.mobility", "straight");
  if (mobility == "straight") {
    r.mobility = Mobility::kStraight;
  } else if (mobility == "waypoint") {
    r.mobility = Mobility::kWaypoint;
  } else {
    throw ConfigError("config: radio.mobility must be 'straight' or 'waypoint'");
  }
  r.warmup_s = cfg.get_double("radio.warmup_s", r.warmup_s);
  r.validate();
  return r;
}

std::string ScenarioConfig::id() const {
  return "l" + format_number(load) + "_v" + format_number(velocity_kmh) + "_s" + std::to_string(seed);
}

void ScenarioConfig::validate() const {
  if (!(load > 0 && load <= 1)) throw std::invalid_argument("ScenarioConfig: load must lie in (0,1]");
  if (velocity_kmh < 0) throw std::invalid_argument("ScenarioConfig: velocity must be >= 0");
  if (horizon < 1) throw std::invalid_argument("ScenarioConfig: horizon must be >= 1");
  if (!(window_seconds > 0)) throw std::invalid_argument("ScenarioConfig: window_seconds must be > 0");
  if (!(short_stay_window_s > 0)) throw std::invalid_argument("ScenarioConfig: short_stay_window must be > 0");
  if (!(rlf_timer_ms > 0)) throw std::invalid_argument("ScenarioConfig: rlf_timer must be > 0");
  if (reestablish_delay_ms < 0) throw std::invalid_argument("ScenarioConfig: reestablish_delay must be >= 0");
}

ScenarioConfig ScenarioConfig::from_config(const KeyValueConfig& cfg) {
  ScenarioConfig s;
  s.load = cfg.get_double("scenario.load", s.load);
  s.velocity_kmh = cfg.get_double("scenario.velocity_kmh", s.velocity_kmh);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("scenario.seed", static_cast<long>(s.seed)));
  s.window_seconds = cfg.get_double("scenario.window_seconds", s.window_seconds);
  s.horizon = static_cast<int>(cfg.get_int("scenario.horizon", s.horizon));
  s.rlf_threshold_dbm = cfg.get_double("scenario.rlf_threshold_dbm", s.rlf_threshold_dbm);
  s.rlf_timer_ms = cfg.get_double("scenario.rlf_timer_ms", s.rlf_timer_ms);
  s.reestablish_delay_ms = cfg.get_double("scenario.reestablish_delay_ms", s.reestablish_delay_ms);
  s.short_stay_window_s = cfg.get_double("scenario.short_stay_window_s", s.short_stay_window_s);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// World

namespace {

enum class Stage { kNone, kPreparing, kExecuting };

struct Ue {
  std::uint64_t id = 0;
  Position pos;
  Position vel;
  Position waypoint;
  double speed = 0.0;
  double expires_at = 0.0;
  bool stationary = false;
  bool dormant = false;
  Rng rng;
  double rho = 1.0;  // shadowing correlation per sample

  std::vector<double> shadow;
  std::vector<double> filtered;
  std::vector<double> inst;
  std::vector<int> ttt;

  bool connected = true;
  std::size_t serving = 0;
  Stage stage = Stage::kNone;
  std::size_t pending = 0;
  long command_sample = 0;
  long complete_sample = 0;
  long below = 0;

  // failure bookkeeping while disconnected
  long reestablish_sample = 0;
  double failure_time = 0.0;
  HoOutcome failure_outcome = HoOutcome::kRlfInSource;
  std::size_t failure_source = 0;
  std::optional<std::size_t> failure_target;

  std::optional<double> last_success_time;
  std::optional<int> last_success_cell;
};

}  // namespace

struct World::Impl {
  RadioConfig radio;
  ScenarioConfig scenario;
  CellLayout layout;
  std::uint64_t stream;
  Rng traffic_rng;

  double period_s;
  long ttt_samples, rlf_samples, prep_samples, exec_samples, reest_samples;
  long next_sample = 1;  // sample k happens at t = k * period
  double now = 0.0;
  double next_arrival = 0.0;
  bool arrivals = true;
  bool shadowing = true;
  std::uint64_t next_id = 1;
  std::vector<Ue> ues;
  std::vector<HoRecord> buffer;
  std::vector<TriggerEvent> triggers;
  std::vector<double> cio_row;  // cio_row[n] = CIO(serving=source, n)

  Impl(RadioConfig r, ScenarioConfig s, std::uint64_t stream_id)
      : radio(std::move(r)),
        scenario(std::move(s)),
        layout(radio.make_layout()),
        stream(stream_id),
        traffic_rng(make_rng(scenario.seed, {stream_id, 0x7261ULL})) {
    radio.validate();
    scenario.validate();
    period_s = radio.sample_period_ms / 1000.0;
    ttt_samples = std::max(1L, to_samples(radio.a3.ttt_ms, radio.sample_period_ms));
    rlf_samples = std::max(1L, to_samples(scenario.rlf_timer_ms, radio.sample_period_ms));
    prep_samples = to_samples(radio.ho_prep_ms, radio.sample_period_ms);
    exec_samples = std::max(1L, to_samples(radio.ho_exec_ms, radio.sample_period_ms));
    reest_samples = std::max(1L, to_samples(scenario.reestablish_delay_ms, radio.sample_period_ms));
    next_arrival = draw_interarrival();
  }

  double arrival_rate() const { return scenario.load * radio.max_arrival_rate; }

  double draw_interarrival() {
    const double rate = arrival_rate();
    if (rate <= 0) return std::numeric_limits<double>::infinity();
    return std::exponential_distribution<double>(rate)(traffic_rng);
  }

  double lookback_s() const {
    return scenario.short_stay_window_s + scenario.reestablish_delay_ms / 1000.0 + 2.0 * period_s;
  }

  void measure(Ue& u) {
    const auto& cells = layout.cells();
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& cell = cells[c];
      const double dx = u.pos.x - cell.position.x, dy = u.pos.y - cell.position.y;
      const double d2 = std::max(dx * dx + dy * dy, 1.0);
      double v = cell.tx_power_dbm - radio.propagation.intercept_db -
                 5.0 * radio.propagation.pathloss_exponent * std::log10(d2) + u.shadow[c];
      if (cell.azimuth_deg) v += antenna_gain_db(cell, u.pos, radio.propagation);
      u.inst[c] = v;
    }
  }

  std::size_t strongest(const Ue& u) const {
    return static_cast<std::size_t>(std::max_element(u.inst.begin(), u.inst.end()) - u.inst.begin());
  }

  Ue& spawn(Position pos, Position vel, double lifetime_s, bool stationary) {
    Ue u;
    u.id = next_id++;
    u.rng = make_rng(scenario.seed, {stream, 0x7565ULL, u.id});
    u.pos = pos;
    u.vel = vel;
    u.speed = std::hypot(vel.x, vel.y);
    u.stationary = stationary || u.speed == 0.0;
    u.expires_at = now + lifetime_s;
    u.rho = std::exp(-u.speed * period_s / radio.propagation.decorrelation_m);
    const std::size_t n = layout.size();
    u.shadow.assign(n, 0.0);
    if (shadowing) {
      std::normal_distribution<double> g(0.0, radio.propagation.shadowing_sigma_db);
      for (auto& s : u.shadow) s = g(u.rng);
    }
    u.inst.assign(n, 0.0);
    u.ttt.assign(n, 0);
    measure(u);
    u.filtered = u.inst;
    u.serving = strongest(u);
    ues.push_back(std::move(u));
    return ues.back();
  }

  void spawn_random() {
    const auto& b = layout.bounds();
    std::uniform_real_distribution<double> ux(b.x_min, b.x_max), uy(b.y_min, b.y_max), ua(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::exponential_distribution<double> session(1.0 / radio.mean_session_s);
    const Position pos{ux(traffic_rng), uy(traffic_rng)};
    const bool stationary = u01(traffic_rng) < radio.stationary_fraction;
    const double heading = ua(traffic_rng);
    const double lifetime = session(traffic_rng);
    const Position waypoint{ux(traffic_rng), uy(traffic_rng)};
    const double speed = stationary ? 0.0 : scenario.velocity_kmh / 3.6;
    Position vel{speed * std::cos(heading), speed * std::sin(heading)};
    if (radio.mobility == Mobility::kWaypoint && speed > 0) vel = toward(pos, waypoint, speed);
    Ue& u = spawn(pos, vel, lifetime, stationary);
    u.waypoint = waypoint;
  }

  static Position toward(Position from, Position to, double speed) {
    const double dx = to.x - from.x, dy = to.y - from.y;
    const double d = std::hypot(dx, dy);
    if (d < 1e-9) return {0.0, 0.0};
    return {speed * dx / d, speed * dy / d};
  }

  void move(Ue& u) {
    u.pos.x += u.vel.x * period_s;
    u.pos.y += u.vel.y * period_s;
    if (radio.mobility == Mobility::kWaypoint) {
      if (std::hypot(u.waypoint.x - u.pos.x, u.waypoint.y - u.pos.y) <= u.speed * period_s) {
        const auto& b = layout.bounds();
        std::uniform_real_distribution<double> ux(b.x_min, b.x_max), uy(b.y_min, b.y_max);
        u.waypoint = Position{ux(u.rng), uy(u.rng)};
        u.vel = toward(u.pos, u.waypoint, u.speed);
      }
    }
    if (shadowing) {
      const double innovation = std::sqrt(1.0 - u.rho * u.rho) * radio.propagation.shadowing_sigma_db;
      std::normal_distribution<double> g(0.0, 1.0);
      for (auto& s : u.shadow) s = u.rho * s + innovation * g(u.rng);
    }
  }

  int cell_id(std::size_t idx) const { return layout.cells()[idx].id; }

  void disconnect(Ue& u, long k, double t, HoOutcome outcome, std::optional<std::size_t> target) {
    u.connected = false;
    u.failure_time = t;
    u.failure_outcome = outcome;
    u.failure_source = u.serving;
    u.failure_target = target;
    u.reestablish_sample = k + reest_samples;
    u.stage = Stage::kNone;
    u.below = 0;
    std::fill(u.ttt.begin(), u.ttt.end(), 0);
  }

  HoRecord failure_record(const Ue& u, std::size_t reestablish) const {
    HoRecord r;
    r.ue = u.id;
    r.time_s = u.failure_time;
    r.source = cell_id(u.failure_source);
    r.target = cell_id(u.failure_target.value_or(reestablish));
    r.outcome = u.failure_outcome;
    r.reestablish_cell = cell_id(reestablish);
    r.prev_success_time_s = u.last_success_time;
    r.prev_success_cell = u.last_success_cell;
    return r;
  }

  void step_ue(Ue& u, long k, double t, std::vector<HoRecord>& out) {
    if (!u.stationary) move(u);
    if (u.dormant) return;
    measure(u);
    const double a = radio.l3_filter_coeff;
    for (std::size_t c = 0; c < u.inst.size(); ++c) u.filtered[c] += a * (u.inst[c] - u.filtered[c]);

    if (!u.connected) {
      if (k >= u.reestablish_sample) {
        const std::size_t best = strongest(u);
        out.push_back(failure_record(u, best));
        u.connected = true;
        u.serving = best;
      }
      return;
    }

    if (u.stage == Stage::kExecuting) {
      if (k >= u.complete_sample) {
        if (u.inst[u.pending] >= radio.access_threshold_dbm) {
          HoRecord r;
          r.ue = u.id;
          r.time_s = t;
          r.source = cell_id(u.serving);
          r.target = cell_id(u.pending);
          r.outcome = HoOutcome::kSuccess;
          r.prev_success_time_s = u.last_success_time;
          r.prev_success_cell = u.last_success_cell;
          out.push_back(r);
          u.last_success_time = t;
          u.last_success_cell = r.source;
          u.serving = u.pending;
          u.stage = Stage::kNone;
          u.below = 0;
          std::fill(u.ttt.begin(), u.ttt.end(), 0);
        } else {
          disconnect(u, k, t, HoOutcome::kRlfDuringExecution, u.pending);
        }
      }
      return;
    }

    u.below = u.inst[u.serving] < scenario.rlf_threshold_dbm ? u.below + 1 : 0;
    if (u.below >= rlf_samples) {
      if (u.stage == Stage::kPreparing) {
        disconnect(u, k, t, HoOutcome::kRlfBeforeCommand, u.pending);
      } else {
        const auto it = std::max_element(u.ttt.begin(), u.ttt.end());
        if (*it > 0) {
          disconnect(u, k, t, HoOutcome::kRlfBeforeCommand, static_cast<std::size_t>(it - u.ttt.begin()));
        } else {
          disconnect(u, k, t, HoOutcome::kRlfInSource, std::nullopt);
        }
      }
      return;
    }

    if (u.stage == Stage::kPreparing) {
      if (k >= u.command_sample) {
        u.stage = Stage::kExecuting;
        u.complete_sample = k + exec_samples;
      }
      return;
    }

    // A3 entry condition with time-to-trigger counted in samples.
    const int s_id = cell_id(u.serving);
    const double base = radio.a3.off_db + radio.a3.hys_db;
    std::optional<std::size_t> fire;
    for (std::size_t n = 0; n < u.filtered.size(); ++n) {
      if (n == u.serving) continue;
      if (u.filtered[n] - u.filtered[u.serving] > base + layout.cio(s_id, cell_id(n))) {
        if (++u.ttt[n] >= ttt_samples && (!fire || u.filtered[n] > u.filtered[*fire])) fire = n;
      } else {
        u.ttt[n] = 0;
      }
    }
    if (fire) {
      u.stage = Stage::kPreparing;
      u.pending = *fire;
      u.command_sample = k + prep_samples;
      std::fill(u.ttt.begin(), u.ttt.end(), 0);
      triggers.push_back(TriggerEvent{u.id, s_id, cell_id(*fire), u.pos, t});
      return;
    }

    if (u.stationary && u.below == 0 && std::all_of(u.ttt.begin(), u.ttt.end(), [](int c) { return c == 0; })) {
      u.dormant = true;
    }
  }

  void step(std::vector<HoRecord>& out) {
    const long k = next_sample++;
    const double t = static_cast<double>(k) * period_s;
    if (arrivals) {
      while (next_arrival <= t) {
        spawn_random();
        next_arrival += draw_interarrival();
      }
    } else {
      while (next_arrival <= t) next_arrival += draw_interarrival();
    }
    const auto& b = layout.bounds();
    for (auto& u : ues) step_ue(u, k, t, out);
    // Departures. A UE leaving while disconnected still closes its failure record.
    std::size_t keep = 0;
    for (std::size_t i = 0; i < ues.size(); ++i) {
      Ue& u = ues[i];
      const bool gone = t >= u.expires_at || !b.contains(u.pos);
      if (gone) {
        if (!u.connected) out.push_back(failure_record(u, strongest(u)));
        continue;
      }
      if (keep != i) ues[keep] = std::move(ues[i]);
      ++keep;
    }
    ues.resize(keep);
  }

  std::vector<HoRecord> advance(double dt_s) {
    if (!(dt_s > 0)) throw std::invalid_argument("World::advance: dt must be > 0");
    std::vector<HoRecord> out;
    const double until = now + dt_s;
    while (static_cast<double>(next_sample) * period_s <= until + 1e-9) step(out);
    now = until;
    return out;
  }
};

World::World(RadioConfig radio, ScenarioConfig scenario, std::uint64_t stream)
    : impl_(std::make_unique<Impl>(std::move(radio), std::move(scenario), stream)) {}
World::~World() = default;
World::World(World&&) noexcept = default;
World& World::operator=(World&&) noexcept = default;

const CellLayout& World::layout() const { return impl_->layout; }
const RadioConfig& World::radio() const { return impl_->radio; }
const ScenarioConfig& World::scenario() const { return impl_->scenario; }
double World::now() const { return impl_->now; }
std::size_t World::ue_count() const { return impl_->ues.size(); }
int World::cio() const { return impl_->layout.tunable_cio(); }
void World::set_cio(int cio) {
  if (cio == impl_->layout.tunable_cio()) return;
  impl_->layout.set_tunable_cio(cio);
  // A new offset can open an A3 entry condition for a parked UE.
  for (auto& u : impl_->ues) u.dormant = false;
}
void World::set_arrivals_enabled(bool enabled) { impl_->arrivals = enabled; }
void World::set_shadowing_enabled(bool enabled) { impl_->shadowing = enabled; }

std::uint64_t World::add_ue(Position start, Position velocity_mps, double lifetime_s) {
  return impl_->spawn(start, velocity_mps, lifetime_s, false).id;
}

std::optional<Position> World::ue_position(std::uint64_t id) const {
  for (const auto& u : impl_->ues)
    if (u.id == id) return u.pos;
  return std::nullopt;
}

std::optional<int> World::serving_cell(std::uint64_t id) const {
  for (const auto& u : impl_->ues)
    if (u.id == id) return u.connected ? std::optional<int>(impl_->cell_id(u.serving)) : std::nullopt;
  return std::nullopt;
}

std::vector<HoRecord> World::advance(double dt_s) { return impl_->advance(dt_s); }

void World::warm_up() {
  auto& im = *impl_;
  if (im.radio.warmup_s > 0) {
    auto recs = im.advance(im.radio.warmup_s);
    const double cutoff = im.now - im.lookback_s();
    for (auto& r : recs)
      if (r.time_s >= cutoff) im.buffer.push_back(r);
  }
  im.triggers.clear();
}

WindowResult World::run_window(int cio) {
  set_cio(cio);
  auto& im = *impl_;
  auto recs = im.advance(im.scenario.window_seconds);
  im.buffer.insert(im.buffer.end(), recs.begin(), recs.end());
  std::stable_sort(im.buffer.begin(), im.buffer.end(), [](const HoRecord& a, const HoRecord& b) {
    return a.time_s < b.time_s || (a.time_s == b.time_s && a.ue < b.ue);
  });
  const events::CellPair pair{im.layout.source(), im.layout.target()};
  auto labeled = events::classify(im.buffer, pair, im.scenario.short_stay_window_s);
  const double cutoff = im.now - im.lookback_s();
  WindowResult result;
  std::vector<HoRecord> carry;
  for (auto& l : labeled) {
    if (l.record.time_s < cutoff) {
      result.labeled.push_back(std::move(l));
    } else {
      carry.push_back(l.record);
    }
  }
  im.buffer = std::move(carry);
  result.counters = events::aggregate(result.labeled, cio);
  return result;
}

const std::vector<World::TriggerEvent>& World::triggers() const { return impl_->triggers; }

}  // namespace mrolab::radio
