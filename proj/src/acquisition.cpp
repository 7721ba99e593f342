#include "acquisition.hpp"

#include <chrono>
#include <numeric>

namespace kohdesign::acq {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shared candidate-sweep + multi-start-descent search over a box of `dim`
// free coordinates.  `embed` maps free coordinates to the full criterion
// argument, so constrained variants reuse the same machinery.
struct Search {
  std::function<double(const VectorXd&)> value;   // over free coords; may throw
  std::function<VectorXd(const VectorXd&)> grad;  // over free coords; may throw
  int dim = 0;
};

struct SearchOutcome {
  VectorXd point;  // free coords
  double value = std::numeric_limits<double>::infinity();
  bool descended = false;  // at least one descent survived the proximity guard
  bool found = false;
};

SearchOutcome run_search(const Search& s, const Options& opts, Rng& rng) {
  SearchOutcome best;
  const auto consider = [&](const VectorXd& x, double f) {
    if (std::isfinite(f) && f < best.value) {
      best.value = f;
      best.point = x;
      best.found = true;
    }
  };
  const auto tracked_value = [&](const VectorXd& x) {
    const double f = s.value(x);  // CandidateRejected propagates to the caller
    consider(x, f);
    return f;
  };

  // Stage 1: LHS candidate sweep.
  const int n_cand = opts.cand_per_dim * s.dim;
  const MatrixXd cand =
      opts.box_lo +
      (design::lhs(n_cand, s.dim, rng) * (opts.box_hi - opts.box_lo)).array();
  std::vector<std::pair<double, int>> scored;
  scored.reserve(static_cast<std::size_t>(n_cand));
  for (int i = 0; i < n_cand; ++i) {
    try {
      scored.emplace_back(tracked_value(cand.row(i).transpose()), i);
    } catch (const CandidateRejected&) {
      // near-duplicate of an existing row: not a usable start
    }
  }
  if (scored.empty()) {
    throw NumericError("acquisition: every candidate was rejected");
  }
  std::sort(scored.begin(), scored.end());

  // Stage 2: gradient descents from the best candidates.
  const int n_starts = std::min<int>(opts.n_starts, static_cast<int>(scored.size()));
  for (int k = 0; k < n_starts; ++k) {
    const VectorXd x0 = cand.row(scored[static_cast<std::size_t>(k)].second).transpose();
    try {
      const auto res = optimize::projected_bfgs(tracked_value, s.grad, x0, opts.box_lo,
                                                opts.box_hi, opts.bfgs);
      best.descended |= std::isfinite(res.f);
    } catch (const CandidateRejected&) {
      // descent wandered within the proximity guard; progress up to that
      // point is already tracked
    }
  }
  return best;
}

Result finish(Strategy st, const SearchOutcome& out, Clock::time_point t0) {
  Result r;
  r.strategy = st;
  r.point = out.point;
  r.value = out.value;
  r.fallback = !out.descended;  // result is the best raw candidate only
  r.wall_s = elapsed_s(t0);
  return r;
}

std::vector<Eigen::Index> unique_field_rows(const MatrixXd& Xf) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < Xf.rows(); ++i) {
    bool dup = false;
    for (Eigen::Index k : keep) {
      if ((Xf.row(i) - Xf.row(k)).cwiseAbs().maxCoeff() == 0.0) {
        dup = true;
        break;
      }
    }
    if (!dup) keep.push_back(i);
  }
  return keep;
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
  if (name == "koh-imspe") return Strategy::KohImspe;
  if (name == "m-imspe") return Strategy::MImspe;
  if (name == "m-imspe-x-in-field") return Strategy::MImspeXInField;
  if (name == "m-imspe-u-at-uhat") return Strategy::MImspeUAtUhat;
  if (name == "lhs") return Strategy::Lhs;
  if (name == "uniform") return Strategy::Uniform;
  throw InvalidArgument("unknown strategy '" + name + "'");
}

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::KohImspe: return "koh-imspe";
    case Strategy::MImspe: return "m-imspe";
    case Strategy::MImspeXInField: return "m-imspe-x-in-field";
    case Strategy::MImspeUAtUhat: return "m-imspe-u-at-uhat";
    case Strategy::Lhs: return "lhs";
    case Strategy::Uniform: return "uniform";
  }
  throw InvalidArgument("unknown strategy enum");
}

Result acquire_koh_imspe(const koh::KohFit& fit, const Options& opts, Rng& rng) {
  const auto t0 = Clock::now();
  const imspe::KohImspe ev(fit);
  Search s;
  s.dim = static_cast<int>(fit.d());
  s.value = [&](const VectorXd& x) { return ev.value(x); };
  s.grad = [&](const VectorXd& x) { return ev.grad(x); };
  return finish(Strategy::KohImspe, run_search(s, opts, rng), t0);
}

namespace {

MatrixXd sim_design(const koh::KohFit& fit) {
  MatrixXd X(fit.n_m(), fit.d());
  X << fit.Xm, fit.Um;
  return X;
}

}  // namespace

Result acquire_m_imspe(const koh::KohFit& fit, const Options& opts, Rng& rng) {
  const auto t0 = Clock::now();
  const imspe::MImspe ev(sim_design(fit), fit.cfg_m, fit.nu_m);
  Search s;
  s.dim = static_cast<int>(fit.d());
  s.value = [&](const VectorXd& x) { return ev.value(x); };
  s.grad = [&](const VectorXd& x) { return ev.grad(x); };
  return finish(Strategy::MImspe, run_search(s, opts, rng), t0);
}

Result acquire_m_imspe_x_in_field(const koh::KohFit& fit, const Options& opts, Rng& rng) {
  const auto t0 = Clock::now();
  if (fit.n_f() == 0) throw InvalidArgument("m-imspe-x-in-field: no field locations");
  const imspe::MImspe ev(sim_design(fit), fit.cfg_m, fit.nu_m);
  const Eigen::Index p = fit.p, s_dim = fit.s;

  SearchOutcome best;
  for (Eigen::Index k : unique_field_rows(fit.Xf)) {
    VectorXd full(p + s_dim);
    full.head(p) = fit.Xf.row(k).transpose();
    const auto embed = [&](const VectorXd& u) {
      VectorXd z = full;
      z.tail(s_dim) = u;
      return z;
    };
    Search s;
    s.dim = static_cast<int>(s_dim);
    s.value = [&](const VectorXd& u) { return ev.value(embed(u)); };
    s.grad = [&](const VectorXd& u) -> VectorXd {
      return ev.grad(embed(u)).tail(s_dim);
    };
    SearchOutcome out;
    try {
      out = run_search(s, opts, rng);
    } catch (const NumericError&) {
      continue;  // every u at this location duplicates an existing run
    }
    if (out.found && out.value < best.value) {
      best = out;
      best.point = embed(out.point);
    }
  }
  if (!best.found) throw NumericError("m-imspe-x-in-field: no admissible location");
  return finish(Strategy::MImspeXInField, best, t0);
}

Result acquire_m_imspe_u_at_uhat(const koh::KohFit& fit, const Options& opts, Rng& rng) {
  const auto t0 = Clock::now();
  const imspe::MImspe ev(sim_design(fit), fit.cfg_m, fit.nu_m);
  const Eigen::Index p = fit.p, s_dim = fit.s;
  const auto embed = [&](const VectorXd& x) {
    VectorXd z(p + s_dim);
    z.head(p) = x;
    z.tail(s_dim) = fit.u_hat;
    return z;
  };
  Search s;
  s.dim = static_cast<int>(p);
  s.value = [&](const VectorXd& x) { return ev.value(embed(x)); };
  s.grad = [&](const VectorXd& x) -> VectorXd { return ev.grad(embed(x)).head(p); };
  SearchOutcome out = run_search(s, opts, rng);
  out.point = embed(out.point);
  return finish(Strategy::MImspeUAtUhat, out, t0);
}

Result acquire(Strategy strategy, const koh::KohFit& fit, const Options& opts, Rng& rng,
               const MatrixXd* master, std::vector<int>* remaining) {
  switch (strategy) {
    case Strategy::KohImspe: return acquire_koh_imspe(fit, opts, rng);
    case Strategy::MImspe: return acquire_m_imspe(fit, opts, rng);
    case Strategy::MImspeXInField: return acquire_m_imspe_x_in_field(fit, opts, rng);
    case Strategy::MImspeUAtUhat: return acquire_m_imspe_u_at_uhat(fit, opts, rng);
    case Strategy::Lhs: {
      const auto t0 = Clock::now();
      if (master == nullptr || remaining == nullptr || remaining->empty()) {
        throw InvalidArgument("lhs strategy requires unused master-design rows");
      }
      const std::size_t pick = rng.uniform_index(remaining->size());
      const int row = (*remaining)[pick];
      remaining->erase(remaining->begin() + static_cast<std::ptrdiff_t>(pick));
      Result r;
      r.strategy = Strategy::Lhs;
      r.point = master->row(row).transpose();
      r.wall_s = elapsed_s(t0);
      return r;
    }
    case Strategy::Uniform: {
      const auto t0 = Clock::now();
      Result r;
      r.strategy = Strategy::Uniform;
      r.point.resize(fit.d());
      for (Eigen::Index i = 0; i < r.point.size(); ++i) r.point[i] = rng.uniform();
      r.wall_s = elapsed_s(t0);
      return r;
    }
  }
  throw InvalidArgument("unknown strategy enum");
}

}  // namespace kohdesign::acq
