#include "slabsep/lpp.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "slabsep/rng.hpp"

namespace slabsep::lpp {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Slab: return "slab";
    case Mode::HalfQuadrant: return "half-quadrant";
    case Mode::FullPlane: return "full-plane";
  }
  return "unknown";
}

Mode mode_from_string(std::string_view name) {
  for (auto m : {Mode::Slab, Mode::HalfQuadrant, Mode::FullPlane}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown environment mode '" + std::string(name) + "'");
}

void EnvironmentSpec::validate() const {
  auto check = [](double rate, const char* name) {
    if (!(rate > 0.0 && rate <= 1.0)) {
      throw std::invalid_argument(std::string(name) + " must lie in (0, 1]");
    }
  };
  if (mode == Mode::Slab) {
    if (n < 1) throw std::invalid_argument("slab width N must be at least 1");
    check(alpha, "alpha");
    check(beta, "beta");
  } else if (mode == Mode::HalfQuadrant) {
    check(alpha, "alpha");
  }
}

Environment::Environment(EnvironmentSpec spec) : spec_(spec) { spec_.validate(); }

bool Environment::contains(Point v) const {
  const auto k = v.offset();
  return k >= offset_min() && k <= offset_max();
}

std::int64_t Environment::offset_min() const { return spec_.mode == Mode::FullPlane ? -kFar : 0; }

std::int64_t Environment::offset_max() const { return spec_.mode == Mode::Slab ? spec_.n : kFar; }

double Environment::rate(Point v) const {
  const auto k = v.offset();
  switch (spec_.mode) {
    case Mode::Slab:
      if (k == 0) return spec_.alpha;
      if (k == spec_.n) return spec_.beta;
      return 1.0;
    case Mode::HalfQuadrant: return k == 0 ? spec_.alpha : 1.0;
    case Mode::FullPlane: return 1.0;
  }
  return 1.0;
}

double Environment::weight_unchecked(Point v) const {
  if (!pinned_.empty()) {
    if (auto it = pinned_.find(v); it != pinned_.end()) return it->second;
  }
  return -std::log(site_uniform(spec_.seed, v.x, v.y)) / rate(v);
}

double Environment::weight(Point v) const {
  if (!contains(v)) {
    throw std::invalid_argument("site (" + std::to_string(v.x) + ", " + std::to_string(v.y) +
                                ") is outside the environment region");
  }
  return weight_unchecked(v);
}

void Environment::pin(Point v, double w) {
  if (!contains(v)) throw std::invalid_argument("pinned site outside the environment region");
  if (!(w >= 0)) throw std::invalid_argument("pinned weight must be nonnegative");
  pinned_[v] = w;
}

bool Window::contains(Point v) const {
  const auto k = v.offset();
  return v.x >= lo.x && v.y >= lo.y && v.x <= hi.x && v.y <= hi.y && k >= k_min && k <= k_max;
}

namespace {

constexpr Point at(std::int64_t d, std::int64_t k) { return {(d + k) / 2, (d - k) / 2}; }

bool odd(std::int64_t v) { return (v % 2) != 0; }

LevelRange level_range(const Environment& env, const Window& w, std::int64_t d) {
  std::int64_t lo = std::max({w.k_min, env.offset_min(), 2 * w.lo.x - d, d - 2 * w.hi.y});
  std::int64_t hi = std::min({w.k_max, env.offset_max(), 2 * w.hi.x - d, d - 2 * w.lo.y});
  if (odd(lo - d)) ++lo;
  if (odd(hi - d)) --hi;
  return {lo, hi};
}

std::size_t slot(const LevelRange& r, std::int64_t k) { return static_cast<std::size_t>((k - r.k_lo) / 2); }

bool in_range(const LevelRange& r, std::int64_t k) {
  return r.size() > 0 && k >= r.k_lo && k <= r.k_hi && !odd(k - r.k_lo);
}

// One backtracking step: the predecessor attaining value(v), preferring e2.
template <class Lookup>
Point step_back(const Environment& env, Point v, Lookup&& value, std::uint64_t& ties) {
  const Point w1 = v - kE1;
  const Point w2 = v - kE2;
  const double t1 = value(w1);
  const double t2 = value(w2);
  const double o1 = t1 == kUnreachable ? kUnreachable : t1 + env.weight_unchecked(w1);
  const double o2 = t2 == kUnreachable ? kUnreachable : t2 + env.weight_unchecked(w2);
  if (o1 == kUnreachable && o2 == kUnreachable) {
    throw std::logic_error("geodesic backtracking reached an unreachable site");
  }
  if (o1 == o2) ++ties;
  return o2 >= o1 ? w2 : w1;
}

}  // namespace

LevelSweep::LevelSweep(const Environment& env, Window window, std::vector<Source> sources)
    : env_(&env), window_(window), sources_(std::move(sources)) {
  if (sources_.empty()) throw std::invalid_argument("passage field needs at least one source");
  for (const auto& s : sources_) {
    if (!env.contains(s.site) || !window_.contains(s.site)) {
      throw std::invalid_argument("source outside the admissible region");
    }
  }
  std::sort(sources_.begin(), sources_.end(), [](const Source& a, const Source& b) {
    return std::make_tuple(a.site.level(), a.site.offset()) < std::make_tuple(b.site.level(), b.site.offset());
  });
  first_level_ = sources_.front().site.level();
  last_level_ = std::min(window_.hi.x + window_.hi.y, kFar);
  level_ = first_level_;
  range_ = range_at(level_);
  values_.assign(range_.size(), kUnreachable);
  seed_sources(level_, values_, range_);
  out_.resize(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    out_[i] = values_[i] == kUnreachable ? kUnreachable
                                         : values_[i] + env_->weight_unchecked(at(level_, range_.k_lo + 2 * static_cast<std::int64_t>(i)));
  }
  cells_ = values_.size();
}

LevelRange LevelSweep::range_at(std::int64_t d) const { return level_range(*env_, window_, d); }

void LevelSweep::seed_sources(std::int64_t d, std::vector<double>& row, const LevelRange& r) const {
  auto it = std::lower_bound(sources_.begin(), sources_.end(), d,
                             [](const Source& s, std::int64_t lvl) { return s.site.level() < lvl; });
  for (; it != sources_.end() && it->site.level() == d; ++it) {
    auto& cell = row[slot(r, it->site.offset())];
    cell = std::max(cell, it->value);
  }
}

double LevelSweep::value(std::int64_t k) const {
  return in_range(range_, k) ? values_[slot(range_, k)] : kUnreachable;
}

bool LevelSweep::advance() {
  if (level_ >= last_level_) return false;
  const std::int64_t d = level_ + 1;
  const LevelRange r = range_at(d);
  std::vector<double> row(r.size(), kUnreachable);
  const LevelRange& pr = range_;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const std::int64_t k = r.k_lo + 2 * static_cast<std::int64_t>(i);
    double best = kUnreachable;
    if (in_range(pr, k - 1)) best = out_[slot(pr, k - 1)];
    if (in_range(pr, k + 1)) best = std::max(best, out_[slot(pr, k + 1)]);
    row[i] = best;
  }
  seed_sources(d, row, r);
  out_.resize(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    out_[i] = row[i] == kUnreachable ? kUnreachable
                                     : row[i] + env_->weight_unchecked(at(d, r.k_lo + 2 * static_cast<std::int64_t>(i)));
  }
  level_ = d;
  range_ = r;
  values_ = std::move(row);
  cells_ += values_.size();
  return true;
}

void LevelSweep::reset(std::int64_t level, LevelRange range, std::vector<double> values) {
  level_ = level;
  range_ = range;
  values_ = std::move(values);
  out_.resize(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    out_[i] = values_[i] == kUnreachable ? kUnreachable
                                         : values_[i] + env_->weight_unchecked(at(level_, range_.k_lo + 2 * static_cast<std::int64_t>(i)));
  }
}

void Geodesic::write_csv(std::ostream& os) const {
  os << "idx,x,y\n";
  for (std::size_t i = 0; i < path.size(); ++i) os << i << ',' << path[i].x << ',' << path[i].y << '\n';
}

PassageField::PassageField(const Environment& env, Window window, std::vector<Source> sources)
    : env_(&env), window_(window), sources_(sources) {
  if (window.hi.x >= kFar || window.hi.y >= kFar) {
    throw std::invalid_argument("stored passage fields need a bounded window");
  }
  LevelSweep sweep(env, window, std::move(sources));
  first_level_ = sweep.level();
  do {
    rows_.push_back({sweep.range(), {sweep.values().begin(), sweep.values().end()}});
  } while (sweep.advance());
  cells_ = sweep.cells();
}

const PassageField::Row* PassageField::row(std::int64_t d) const {
  if (d < first_level_ || d > last_level()) return nullptr;
  return &rows_[static_cast<std::size_t>(d - first_level_)];
}

double PassageField::value(Point v) const {
  const Row* r = row(v.level());
  if (!r || !in_range(r->range, v.offset())) return kUnreachable;
  return r->values[slot(r->range, v.offset())];
}

bool PassageField::is_source(Point v) const {
  return std::any_of(sources_.begin(), sources_.end(), [&](const Source& s) { return s.site == v; });
}

Geodesic PassageField::geodesic_to(Point v) const {
  Geodesic g;
  g.value = value(v);
  if (g.value == kUnreachable) throw std::invalid_argument("target is not reachable from the sources");
  Point cur = v;
  g.path.push_back(cur);
  auto lookup = [&](Point w) { return value(w); };
  while (true) {
    const double here = value(cur);
    const auto src = std::find_if(sources_.begin(), sources_.end(), [&](const Source& s) {
      return s.site == cur && s.value == here;
    });
    if (src != sources_.end()) break;
    cur = step_back(*env_, cur, lookup, g.ties);
    g.path.push_back(cur);
  }
  std::reverse(g.path.begin(), g.path.end());
  g.value -= value(g.path.front());
  return g;
}

void PassageField::write_csv(std::ostream& os) const {
  os << "x,y,value\n";
  os.precision(17);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto d = first_level_ + static_cast<std::int64_t>(i);
    const auto& r = rows_[i];
    for (std::size_t j = 0; j < r.values.size(); ++j) {
      if (r.values[j] == kUnreachable) continue;
      const Point p = at(d, r.range.k_lo + 2 * static_cast<std::int64_t>(j));
      os << p.x << ',' << p.y << ',' << r.values[j] << '\n';
    }
  }
}

std::optional<double> passage_value(const Environment& env, Point u, Point v, Window window) {
  if (!precedes(u, v) || !env.contains(u) || !env.contains(v)) return std::nullopt;
  Window w = window;
  w.lo = {std::max(w.lo.x, u.x), std::max(w.lo.y, u.y)};
  w.hi = {std::min(w.hi.x, v.x), std::min(w.hi.y, v.y)};
  if (!w.contains(u) || !w.contains(v)) return std::nullopt;
  LevelSweep sweep(env, w, {{u, 0.0}});
  while (sweep.level() < v.level() && sweep.advance()) {
  }
  const double t = sweep.value(v.offset());
  if (t == kUnreachable) return std::nullopt;
  return t;
}

std::uint64_t window_cells(const Environment& env, const Window& w, std::int64_t d0, std::int64_t d1) {
  std::uint64_t total = 0;
  for (std::int64_t d = d0; d <= d1; ++d) total += level_range(env, w, d).size();
  return total;
}

namespace {

Window geodesic_window(Point u, Point v, const Window& band) {
  Window w = band;
  w.lo = u;
  w.hi = v;
  return w;
}

}  // namespace

Geodesic geodesic(const Environment& env, Point u, Point v, const GeodesicOptions& options) {
  if (!precedes(u, v)) throw std::invalid_argument("geodesic target must dominate its start");
  if (!env.contains(u) || !env.contains(v)) throw std::invalid_argument("geodesic endpoints outside the region");
  const Window w = geodesic_window(u, v, options.band);
  const auto cells = window_cells(env, w, u.level(), v.level());
  if (cells <= options.cell_budget) {
    PassageField field(env, w, {{u, 0.0}});
    return field.geodesic_to(v);
  }
  const auto levels = v.level() - u.level() + 1;
  const auto interval = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::sqrt(double(levels)))));
  return geodesic_checkpointed(env, u, v, options.band, interval);
}

Geodesic geodesic_checkpointed(const Environment& env, Point u, Point v, Window band,
                               std::int64_t checkpoint_interval) {
  if (!precedes(u, v)) throw std::invalid_argument("geodesic target must dominate its start");
  if (checkpoint_interval < 1) throw std::invalid_argument("checkpoint interval must be positive");
  const Window w = geodesic_window(u, v, band);
  struct Checkpoint {
    std::int64_t level;
    LevelRange range;
    std::vector<double> values;
  };
  std::vector<Checkpoint> checkpoints;
  LevelSweep sweep(env, w, {{u, 0.0}});
  const std::int64_t d0 = u.level();
  do {
    if ((sweep.level() - d0) % checkpoint_interval == 0) {
      checkpoints.push_back({sweep.level(), sweep.range(), {sweep.values().begin(), sweep.values().end()}});
    }
  } while (sweep.level() < v.level() && sweep.advance());

  Geodesic g;
  g.value = sweep.value(v.offset());
  if (g.value == kUnreachable) throw std::invalid_argument("target is not reachable from the start");

  Point cur = v;
  g.path.push_back(cur);
  // rows of the segment being walked, indexed from `base`
  std::vector<std::pair<LevelRange, std::vector<double>>> rows;
  std::int64_t base = 0;
  auto lookup = [&](Point p) {
    const auto d = p.level();
    if (d < base || d >= base + static_cast<std::int64_t>(rows.size())) return kUnreachable;
    const auto& [r, vals] = rows[static_cast<std::size_t>(d - base)];
    return in_range(r, p.offset()) ? vals[slot(r, p.offset())] : kUnreachable;
  };
  for (auto it = checkpoints.rbegin(); it != checkpoints.rend() && cur != u; ++it) {
    if (it->level >= cur.level()) continue;
    rows.clear();
    base = it->level;
    LevelSweep seg(env, w, {{u, 0.0}});
    seg.reset(it->level, it->range, it->values);
    rows.emplace_back(seg.range(), std::vector<double>(seg.values().begin(), seg.values().end()));
    while (seg.level() < cur.level() - 1 && seg.advance()) {
      rows.emplace_back(seg.range(), std::vector<double>(seg.values().begin(), seg.values().end()));
    }
    while (cur != u && cur.level() > base) {
      cur = step_back(env, cur, lookup, g.ties);
      g.path.push_back(cur);
    }
  }
  std::reverse(g.path.begin(), g.path.end());
  return g;
}

std::vector<Point> GrowthInterface::points() const {
  std::vector<Point> pts;
  pts.reserve(steps.size() + 1);
  pts.push_back(anchor);
  for (auto s : steps) pts.push_back(pts.back() + (s == 0 ? kE1 : Point{0, -1}));
  return pts;
}

Configuration GrowthInterface::configuration() const { return Configuration(steps); }

void GrowthInterface::write_csv(std::ostream& os) const {
  os << "idx,x,y\n";
  const auto pts = points();
  for (std::size_t i = 0; i < pts.size(); ++i) os << i << ',' << pts[i].x << ',' << pts[i].y << '\n';
}

GrowthInterface encode_interface(const Configuration& eta, Point anchor) {
  return {anchor, {eta.sites().begin(), eta.sites().end()}};
}

Configuration decode_interface(const GrowthInterface& g) { return g.configuration(); }

GrowthInterface interface_from_points(std::span<const Point> pts) {
  if (pts.size() < 2) throw std::invalid_argument("interface needs at least two points");
  GrowthInterface g{pts[0], {}};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Point d = pts[i] - pts[i - 1];
    if (d == kE1) {
      g.steps.push_back(0);
    } else if (d == Point{0, -1}) {
      g.steps.push_back(1);
    } else {
      throw std::invalid_argument("interface points must differ by e1 or -e2");
    }
  }
  return g;
}

namespace {

void require_slab_interface(const Environment& env, const GrowthInterface& g) {
  if (env.mode() != Mode::Slab) throw std::invalid_argument("growth interfaces live in slab mode");
  if (g.size() != env.n()) throw std::invalid_argument("interface length must equal the slab width");
  if (g.anchor.offset() != 0) throw std::invalid_argument("interface anchor must lie on the upper boundary");
}

}  // namespace

InterfaceEvolution evolve_interface(const Environment& env, const GrowthInterface& g0, double t,
                                    bool record_events) {
  require_slab_interface(env, g0);
  if (!(t >= 0)) throw std::invalid_argument("time must be nonnegative");
  const int n = g0.size();
  auto pts = g0.points();
  auto steps = g0.steps;
  auto movable = [&](int i) {
    if (i == 0) return steps[0] == 0;
    if (i == n) return steps[n - 1] == 1;
    return steps[i - 1] == 1 && steps[i] == 0;
  };
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  std::vector<char> scheduled(static_cast<std::size_t>(n + 1), 0);
  auto schedule = [&](int i, double now) {
    if (i < 0 || i > n || scheduled[i] || !movable(i)) return;
    scheduled[i] = 1;
    queue.emplace(now + env.weight(pts[i]), i);
  };
  for (int i = 0; i <= n; ++i) schedule(i, 0.0);

  InterfaceEvolution out;
  while (!queue.empty() && queue.top().first <= t) {
    const auto [s, i] = queue.top();
    queue.pop();
    scheduled[i] = 0;
    if (record_events) {
      GrowthEvent e;
      e.t = s;
      e.corner = pts[i];
      e.kind = i == 0 ? tasep::EventKind::Enter : (i == n ? tasep::EventKind::Exit : tasep::EventKind::Hop);
      e.site = i;
      e.label = pts[i].y + 1;
      out.events.push_back(e);
    }
    pts[i] = pts[i] + Point{1, 1};
    if (i > 0) steps[i - 1] = 0;
    if (i < n) steps[i] = 1;
    schedule(i - 1, s);
    schedule(i + 1, s);
  }
  out.interface = GrowthInterface{pts[0], steps};
  return out;
}

GrowthInterface interface_from_field(const Environment& env, const GrowthInterface& g0, double t) {
  require_slab_interface(env, g0);
  const auto pts0 = g0.points();
  Point lo = pts0[0];
  for (auto p : pts0) lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
  std::vector<Source> sources;
  for (auto p : pts0) sources.push_back({p, 0.0});
  std::int64_t extent = env.n() + 8 + static_cast<std::int64_t>(std::ceil(4 * t));
  while (true) {
    const Window w = Window::box(lo, lo + Point{extent + env.n(), extent + env.n()});
    PassageField field(env, w, sources);
    std::vector<Point> pts;
    bool inside = true;
    for (auto p : pts0) {
      Point u = p;
      while (true) {
        if (!w.contains(u)) {
          inside = false;
          break;
        }
        if (field.value(u) + env.weight(u) > t) break;
        u = u + Point{1, 1};
      }
      if (!inside) break;
      pts.push_back(u);
    }
    if (inside) return interface_from_points(pts);
    extent *= 2;
  }
}

std::optional<BoundaryHit> first_boundary_hit(const Geodesic& g, Boundary boundary, int n) {
  for (std::size_t i = 0; i < g.path.size(); ++i) {
    const Point p = g.path[i];
    if (boundary == Boundary::Upper && p.offset() == 0) return BoundaryHit{p, i, p.x};
    if (boundary == Boundary::Lower && p.offset() == n) return BoundaryHit{p, i, p.y};
  }
  return std::nullopt;
}

bool traversing_path(const Geodesic& g, int n, std::int64_t m) {
  if (m < n) return false;
  std::optional<std::int64_t> x1;
  for (const Point p : g.path) {
    if (!x1) {
      if (p.offset() == 0 && p.x >= n && p.x <= m) x1 = p.x;
      continue;
    }
    // q-index of (y + N, y) is y + N/2; compare doubled values
    if (p.offset() == n && 2 * p.y + n >= 2 * *x1 && 2 * p.y + n <= 2 * m) return true;
  }
  return false;
}

bool traversing_event(const Environment& env, std::int64_t m) {
  if (env.mode() != Mode::Slab) throw std::invalid_argument("traversal events live in slab mode");
  const int n = env.n();
  if (m < n) return false;
  const auto g = geodesic(env, Point{0, -n}, Point{m, m});
  return traversing_path(g, n, m);
}

LineTarget line_target(const PassageField& field, std::int64_t m, double b) {
  const model::SlabGeometry geo(field.environment().n());
  std::optional<LineTarget> best;
  for (const Point p : geo.line_segment(m, b)) {
    const double v = field.value(p);
    if (v == kUnreachable) continue;
    if (!best || v > best->value) best = LineTarget{p, v};
  }
  if (!best) throw std::invalid_argument("line segment is not reachable from the field sources");
  return *best;
}

SemiInfinitePrefix semi_infinite_prefix(const Environment& env, Point start, int depth,
                                        std::optional<std::int64_t> m0, int max_doublings) {
  if (env.mode() != Mode::Slab) throw std::invalid_argument("semi-infinite geodesics live in slab mode");
  if (!env.contains(start)) throw std::invalid_argument("start outside the slab");
  if (depth < 1) throw std::invalid_argument("depth must be positive");
  const int n = env.n();
  const double b = (1.0 - env.spec().beta) / env.spec().beta;
  std::int64_t m = m0.value_or(start.x + n + depth);
  if (m < start.x + n) throw std::invalid_argument("initial far line must lie beyond the start");

  auto prefix_for = [&](std::int64_t mm) {
    const Window w = Window::box(start, Point{mm + n, mm});
    PassageField field(env, w, {{start, 0.0}});
    const auto target = line_target(field, mm, b);
    auto path = field.geodesic_to(target.site).path;
    if (path.size() > static_cast<std::size_t>(depth) + 1) path.resize(static_cast<std::size_t>(depth) + 1);
    return path;
  };

  SemiInfinitePrefix result;
  auto prev = prefix_for(m);
  for (int i = 0; i < max_doublings; ++i) {
    const std::int64_t next = start.x + 2 * (m - start.x);
    auto cur = prefix_for(next);
    result.doublings = i + 1;
    if (cur == prev) {
      result.prefix = std::move(cur);
      result.stabilized = true;
      result.horizon = m;
      return result;
    }
    prev = std::move(cur);
    m = next;
  }
  result.prefix = std::move(prev);
  result.horizon = m;
  return result;
}

std::optional<double> restricted_passage(const Environment& env, std::int64_t w, Point u, Point v,
                                         BandSide side) {
  if (w < 0) throw std::invalid_argument("band width must be nonnegative");
  Window band;
  if (side == BandSide::Upper) {
    band = band.with_band(0, w);
  } else {
    if (env.mode() != Mode::Slab) throw std::invalid_argument("lower-boundary bands need slab mode");
    band = band.with_band(env.n() - w, env.n());
  }
  if (!band.contains(u) || !band.contains(v)) throw std::invalid_argument("endpoints must lie in the band");
  return passage_value(env, u, v, band);
}

std::int64_t default_band(int n) {
  if (n < 1) throw std::invalid_argument("N must be at least 1");
  return static_cast<std::int64_t>(std::ceil(std::pow(std::log(static_cast<double>(n)), 9.0)));
}

FlowCounts flow_counts(const Environment& env, double t) {
  if (env.mode() != Mode::Slab) throw std::invalid_argument("flow counts live in slab mode");
  if (!(t >= 0)) throw std::invalid_argument("time must be nonnegative");
  const int n = env.n();
  Window w;
  w.lo = {0, 0};
  LevelSweep sweep(env, w, {{Point{0, 0}, 0.0}});
  FlowCounts c;
  auto completion = [&](std::int64_t k) {
    const Point p = at(sweep.level(), k);
    return sweep.value(k) + env.weight_unchecked(p);
  };
  while (true) {
    const auto d = sweep.level();
    // S(p_m) <= t is the (m+1)-th entry, S((N+j, j)) <= t the (j+1)-th exit
    if (!odd(d) && completion(0) <= t) ++c.entered;
    if (d >= n && !odd(d - n) && completion(n) <= t) ++c.exited;
    const auto vals = sweep.values();
    if (*std::min_element(vals.begin(), vals.end()) > t) break;
    sweep.advance();
  }
  return c;
}

double event_B_statistic(const Environment& env, std::int64_t n0, double r, std::optional<std::int64_t> band) {
  if (env.mode() != Mode::Slab) throw std::invalid_argument("event B lives in slab mode");
  const auto& s = env.spec();
  if (s.alpha != s.beta || !(s.alpha < 0.5)) {
    throw std::invalid_argument("event B is defined on the coexistence line");
  }
  if (!(r >= 0)) throw std::invalid_argument("window factor r must be nonnegative");
  const int n = env.n();
  const std::int64_t w = std::min<std::int64_t>(band.value_or(default_band(n)), n);
  const double len = r * n * static_cast<double>(n);
  const auto last = n0 + static_cast<std::int64_t>(std::floor(len + 1e-9));
  const double rho = s.alpha * (1.0 - s.alpha);
  double worst = 0;
  for (int side = 0; side < 2; ++side) {
    const std::int64_t shift = side == 0 ? 0 : n;
    const std::int64_t k = shift;
    for (std::int64_t i = n0; i < last; ++i) {
      Window win = Window::box(Point{i + shift, i}, Point{last + shift, last});
      win = side == 0 ? win.with_band(0, w) : win.with_band(n - w, n);
      LevelSweep sweep(env, win, {{Point{i + shift, i}, 0.0}});
      while (sweep.advance()) {
        const auto d = sweep.level();
        if (odd(d - 2 * i - shift)) continue;
        const auto j = (d - shift) / 2;
        const double t = sweep.value(k);
        if (t == kUnreachable) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::abs(t - static_cast<double>(j - i) / rho));
      }
    }
  }
  return worst / n;
}

bool event_B(const Environment& env, std::int64_t n0, double r, double d, std::optional<std::int64_t> band) {
  return event_B_statistic(env, n0, r, band) <= d;
}

}  // namespace slabsep::lpp
