// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "dvio/evaluation.hpp"
#include "dvio/fusion.hpp"
#include "dvio/orb.hpp"
#include "dvio/pipeline.hpp"
#include "dvio/px4flow.hpp"
#include "dvio/rigid_body.hpp"
#include "dvio/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dvio;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome fast_oracle() {
  std::mt19937_64 rng(101);
  const auto t0 = Clock::now();
  int equal = 0;
  std::size_t corners = 0;
  for (int i = 0; i < 50; ++i) {
    const auto img = testutil::random_image(64, 64, rng);
    const auto got = orb::fast_detect(img, 20, false);
    const auto want = oracle::fast_all(img, 20);
    std::vector<oracle::Pixel> g;
    for (const auto& c : got) g.push_back({c.x, c.y, c.fast_score});
    corners += want.size();
    equal += g == want;
  }
  const double dt = seconds_since(t0);
  return {equal == 50 && dt < 10.0, fmt("%d/50 images identical (%zu oracle corners), %.2f s", equal, corners, dt)};
}

Outcome harris_oracle() {
  std::mt19937_64 rng(202);
  int identical = 0;
  long compared = 0, sign_errors = 0, inversions = 0, inversions_beyond = 0;
  for (int i = 0; i < 100; ++i) {
    const auto img = testutil::random_image(32, 32, rng);
    std::vector<orb::Corner> cs;
    for (int y = 4; y < 28; ++y)
      for (int x = 4; x < 28; ++x) cs.push_back({x, y, 0, 0});
    const auto got = orb::harris_refine(img, cs);
    struct Ranked {
      double score;
      int x, y;
    };
    std::vector<Ranked> a, b;
    std::vector<oracle::Harris> hs;
    for (const auto& c : got) {
      const auto h = oracle::harris(img, c.x, c.y);
      hs.push_back(h);
      if (std::abs(h.score) > h.bound) {
        ++compared;
        sign_errors += (c.harris_score > 0) != (h.score > 0);
      }
      a.push_back({double(c.harris_score), c.x, c.y});
      b.push_back({h.score, c.x, c.y});
    }
    auto by_score = [](const Ranked& p, const Ranked& q) {
      if (p.score != q.score) return p.score > q.score;
      return p.y != q.y ? p.y < q.y : p.x < q.x;
    };
    // Pairs involving the oracle's top 50 that the integer score orders the
    // other way round.
    std::vector<std::size_t> order(got.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return hs[p].score > hs[q].score; });
    for (std::size_t p = 0; p < 50; ++p)
      for (std::size_t q = p + 1; q < order.size(); ++q) {
        const auto i1 = order[p], i2 = order[q];
        if (got[i1].harris_score < got[i2].harris_score) {
          ++inversions;
          inversions_beyond += hs[i1].score - hs[i2].score > hs[i1].bound + hs[i2].bound;
        }
      }
    std::sort(a.begin(), a.end(), by_score);
    std::sort(b.begin(), b.end(), by_score);
    bool same = true;
    for (int k = 0; k < 50; ++k) same &= a[k].x == b[k].x && a[k].y == b[k].y;
    identical += same;
  }
  return {sign_errors == 0 && identical >= 95,
          fmt("sign mismatches %ld of %ld; top-50 ranking identical on %d/100; inverted pairs %ld, %ld beyond the "
              "quantization bound",
              sign_errors, compared, identical, inversions, inversions_beyond)};
}

// Bilinear lattice with 4 px cells; frames are sampled at sub-pixel offsets.
struct Field {
  int n = 80;
  std::vector<double> g;
  explicit Field(uint64_t seed) : g(static_cast<std::size_t>(n) * n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 255.0);
    for (auto& v : g) v = u(rng);
  }
  double operator()(double x, double y) const {
    const double fx = x / 4.0 + 4, fy = y / 4.0 + 4;
    const int ix = static_cast<int>(std::floor(fx)), iy = static_cast<int>(std::floor(fy));
    const double ax = fx - ix, ay = fy - iy;
    auto at = [&](int i, int j) { return g[static_cast<std::size_t>(j) * n + i]; };
    return (1 - ay) * ((1 - ax) * at(ix, iy) + ax * at(ix + 1, iy)) + ay * ((1 - ax) * at(ix, iy + 1) + ax * at(ix + 1, iy + 1));
  }
  Image8 frame(double ox, double oy) const {
    Image8 img(160, 120);
    for (int y = 0; y < 120; ++y)
      for (int x = 0; x < 160; ++x) img(x, y) = static_cast<uint8_t>(std::lround((*this)(x - ox, y - oy)));
    return img;
  }
};

Outcome flow_exactness() {
  px4flow::FlowConfig cfg;
  long int_valid = 0, int_exact = 0, half_total = 0, half_ok = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const Field f(seed);
    const auto base = f.frame(0, 0);
    for (int dy = -cfg.search_radius; dy <= cfg.search_radius; ++dy)
      for (int dx = -cfg.search_radius; dx <= cfg.search_radius; ++dx) {
        if (dx * dx + dy * dy > cfg.search_radius * cfg.search_radius) continue;
        for (const auto& v : px4flow::block_flow(base, f.frame(dx, dy), cfg)) {
          if (!v.valid) continue;
          ++int_valid;
          int_exact += v.du2 == 2 * dx && v.dv2 == 2 * dy;
        }
      }
    for (double hx : {-2.5, -1.5, -0.5, 0.5, 1.5, 2.5})
      for (double hy : {-1.5, 0.5, 2.5}) {
        for (const auto& v : px4flow::block_flow(base, f.frame(hx, hy), cfg)) {
          ++half_total;
          half_ok += v.valid && std::abs(v.du() - hx) <= 0.5 && std::abs(v.dv() - hy) <= 0.5;
        }
      }
  }
  const double frac = double(half_ok) / double(half_total);
  return {int_valid > 0 && int_exact == int_valid && frac >= 0.9,
          fmt("integer %ld/%ld valid vectors exact; half-pixel %.1f%% within 0.5 px", int_exact, int_valid,
              100.0 * frac)};
}

TrackedMatch moved(double x, double y, double du, double dv, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {x, y, c * x - s * y + du, s * x + c * y + dv};
}

Outcome rigid_recovery() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> ux(-80, 80), uy(-60, 60), ut(-4, 4), ua(-0.05, 0.05), off(10, 25);
  std::bernoulli_distribution sign(0.5);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double du = ut(rng), dv = ut(rng), a = ua(rng);
    std::vector<TrackedMatch> ms;
    for (int i = 0; i < 50; ++i) ms.push_back(moved(ux(rng), uy(rng), du, dv, a));
    const auto m = rigid::solve_rigid_2d(ms);
    worst = std::max({worst, std::abs(m.du - du), std::abs(m.dv - dv), std::abs(m.dpsi - a)});
  }
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double du = ut(rng), dv = ut(rng), a = ua(rng);
    std::vector<TrackedMatch> ms;
    for (int i = 0; i < 70; ++i) ms.push_back(moved(ux(rng), uy(rng), du, dv, a));
    for (int i = 0; i < 30; ++i) {
      auto m = moved(ux(rng), uy(rng), du, dv, a);
      m.cx += sign(rng) ? off(rng) : -off(rng);
      m.cy += sign(rng) ? off(rng) : -off(rng);
      ms.push_back(m);
    }
    std::shuffle(ms.begin(), ms.end(), rng);
    const auto e = rigid::estimate_motion(ms);
    ok += e.valid && std::abs(e.du - du) <= 0.05 && std::abs(e.dv - dv) <= 0.05 && std::abs(e.dpsi - a) <= 0.001;
  }
  return {worst <= 1e-9 && ok == 100, fmt("noiseless worst error %.2e; outlier trials %d/100", worst, ok)};
}

Trajectory wander(std::size_t n, double dt, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> turn(0.0, 0.05);
  Trajectory out;
  double x = 0, y = 0, psi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    StampedPose p;
    p.t = i * dt;
    p.position = {x, y, 1.0 + 0.1 * std::sin(0.3 * p.t)};
    p.orientation = yaw_quaternion(psi);
    out.push_back(p);
    psi += turn(rng);
    x += dt * std::cos(psi);
    y += dt * std::sin(psi);
  }
  return out;
}

Outcome metric_oracle() {
  std::mt19937_64 rng(505);
  std::normal_distribution<double> n(0, 0.01), yaw(0, 0.002), unit(0, 1);
  double rte_worst = 0;
  for (int pair = 0; pair < 10; ++pair) {
    const auto gt = wander(1500 + 100 * pair, 0.02, 600 + pair);
    auto est = gt;
    Eigen::Vector3d drift = Eigen::Vector3d::Zero();
    double yaw_drift = 0;
    for (auto& p : est) {
      drift += Eigen::Vector3d(n(rng), n(rng), 0.1 * n(rng));
      yaw_drift += yaw(rng);
      p.position += drift;
      p.orientation = yaw_quaternion(yaw_drift) * p.orientation;
    }
    const auto pairs = eval::associate(est, gt);
    const std::vector<double> lengths = {5, 10, 20};
    const auto got = eval::relative_translation_error(pairs, lengths);
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      const auto errs = oracle::rte(pairs, lengths[i]);
      if (errs.size() != got[i].samples) return {false, "sample counts differ from the oracle"};
      double mean = 0;
      for (double e : errs) mean += e;
      mean /= errs.size();
      rte_worst = std::max(rte_worst, std::abs(got[i].mean_error_pct - mean));
    }
  }
  double sim_worst = 0;
  const auto gt = wander(500, 0.02, 700);
  std::vector<Eigen::Vector3d> src;
  for (const auto& p : gt) src.push_back(p.position);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Matrix3d R = Eigen::Quaterniond(unit(rng), unit(rng), unit(rng), unit(rng)).normalized().toRotationMatrix();
    const double s = std::exp(unit(rng));
    const Eigen::Vector3d t(10 * unit(rng), 10 * unit(rng), 10 * unit(rng));
    std::vector<Eigen::Vector3d> dst;
    for (const auto& p : src) dst.push_back(s * R * p + t);
    const auto a = eval::align_sim3(src, dst);
    sim_worst = std::max({sim_worst, std::abs(a.scale - s), (a.rotation - R).cwiseAbs().maxCoeff(),
                          (a.translation - t).cwiseAbs().maxCoeff()});
  }
  return {rte_worst <= 1e-12 && sim_worst <= 1e-9,
          fmt("relative error vs oracle %.2e; sim3 inversion %.2e", rte_worst, sim_worst)};
}

double path_length(const Trajectory& t) {
  double len = 0;
  for (std::size_t i = 1; i < t.size(); ++i) len += (t[i].position - t[i - 1].position).head<2>().norm();
  return len;
}

Outcome end_to_end() {
  synth::SynthConfig sc;
  sc.path = synth::Path::square(2.0, 1.0, 60.0);
  const auto seq = synth::synth_generate(sc);
  const double len = path_length(seq.ground_truth);
  bool pass = true;
  std::string detail;
  for (auto tracker : {pipeline::TrackerKind::orb, pipeline::TrackerKind::px4flow}) {
    pipeline::PipelineConfig cfg;
    cfg.tracker = tracker;
    const auto t0 = Clock::now();
    const auto res = pipeline::run(seq, cfg);
    const double dt = seconds_since(t0);
    const double final_pct = 100.0 * (res.estimate.back().position - seq.ground_truth.back().position).head<2>().norm() / len;
    const double rmse = eval::rmse(res.estimate, seq.ground_truth).rmse;
    pass &= final_pct <= 1.0 && rmse <= 0.05 && dt < 300.0;
    detail += fmt("%s final %.2f%% rmse %.3f m %.0f s; ", pipeline::to_string(tracker).c_str(), final_pct, rmse, dt);
  }
  detail += fmt("path %.2f m", len);
  return {pass, detail};
}

Outcome complexity() {
  const auto rep = pipeline::bench({});
  return {rep.px4flow_fit.r2 >= 0.95 && rep.orb_max_min_ratio <= 1.1,
          fmt("px4flow quadratic R^2 %.4f; orb max/min %.3f", rep.px4flow_fit.r2, rep.orb_max_min_ratio)};
}

Outcome ordering() {
  auto score = [](const synth::Path& path, pipeline::Mode mode) {
    synth::SynthConfig sc;
    sc.path = path;
    const auto seq = synth::synth_generate(sc);
    pipeline::PipelineConfig cfg;
    cfg.tracker = pipeline::TrackerKind::px4flow;
    cfg.mode = mode;
    return eval::rmse(pipeline::run(seq, cfg).estimate, seq.ground_truth).rmse;
  };
  const auto turns = synth::Path::two_turns(2.0, 1.0, 1.0, 6.0, 4.0);
  const auto shuttle = synth::Path::shuttle(2.0, 1.0, 1.0, 5.0, 4);
  const double turns_t = score(turns, pipeline::Mode::rigid_template);
  const double turns_r = score(turns, pipeline::Mode::reference);
  const double shuttle_t = score(shuttle, pipeline::Mode::rigid_template);
  const double shuttle_r = score(shuttle, pipeline::Mode::reference);
  return {turns_t < turns_r && shuttle_r <= 2.0 * shuttle_t,
          fmt("two turns template %.4f vs reference %.4f m; shuttle reference %.4f vs template %.4f m", turns_t,
              turns_r, shuttle_r, shuttle_t)};
}

Outcome filter_health() {
  using namespace fusion;
  std::mt19937_64 rng(909);
  std::normal_distribution<double> n(0, 1);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> dt(0.001, 0.05);
  NavState s;
  double worst_eig = 0;
  int trace_violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double before = s.P.trace();
    switch (pick(rng)) {
      case 0: {
        ImuSample u;
        u.accel = {n(rng), n(rng), n(rng)};
        u.gyro = {0.1 * n(rng), 0.1 * n(rng), n(rng)};
        s = ekf_predict(s, u, dt(rng));
        trace_violations += s.P.trace() < before - 1e-15;
        break;
      }
      case 1: {
        const FlowMeasurement m{s.vx + 0.2 * n(rng), s.vy + 0.2 * n(rng), 0.2 * n(rng), dt(rng), s.psi};
        s = ekf_update_flow(s, m).state;
        trace_violations += s.P.trace() > before + 1e-15;
        break;
      }
      default:
        s = ekf_update_height(s, std::max(0.1, std::abs(s.z) + 0.05 * n(rng))).state;
        trace_violations += s.P.trace() > before + 1e-15;
    }
    worst_eig = std::min(worst_eig, Eigen::SelfAdjointEigenSolver<Mat6>(s.P).eigenvalues().minCoeff());
  }
  return {worst_eig >= -1e-9 && trace_violations == 0,
          fmt("min eigenvalue %.3e; trace violations %d over 10000 cycles", worst_eig, trace_violations)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"FAST oracle equivalence", fast_oracle},
      {"Harris oracle agreement", harris_oracle},
      {"block flow exactness", flow_exactness},
      {"rigid-body recovery", rigid_recovery},
      {"metric oracle", metric_oracle},
      {"end-to-end square path", end_to_end},
      {"runtime complexity", complexity},
      {"template vs reference ordering", ordering},
      {"filter health", filter_health},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
