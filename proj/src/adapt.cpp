#include "ocpafem/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ocpafem {

double effectivity(double est_total, double err_total) {
  if (err_total > 0.0) return est_total / err_total;
  if (est_total > 0.0) return std::numeric_limits<double>::infinity();
  return 1.0;
}

std::vector<int> mark_max(const IndicatorField& ind) {
  if (ind.values.size() == 0) throw std::runtime_error("mark_max: empty indicator field");
  const double mx = ind.max();
  std::vector<int> marked;
  if (mx <= 0.0) return marked;  // converged
  const double thr = 0.5 * mx;
  for (int e = 0; e < ind.values.size(); ++e)
    if (ind.values[e] > thr) marked.push_back(e);
  return marked;
}

namespace {

double control_error_l2(const Mesh& m, const P0Function& u, const ExactSolution& ex,
                        const ControlProblem& pb) {
  const QuadRule& q = rule(m.dim(), error_degree(m.dim()));
  double s = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const MappedRule mr = map_rule(m, e, q);
    for (int k = 0; k < q.size(); ++k) {
      const double uex = project_box(-ex.p(mr.points[k]) / pb.nu, pb.lower, pb.upper);
      const double d = uex - u.values[e];
      s += q.weights[k] * mr.jacobian * d * d;
    }
  }
  return std::sqrt(s);
}

}  // namespace

AdaptResult adaptive_loop(const ControlProblem& pb, const Mesh& initial,
                          const AdaptConfig& config) {
  if (config.max_iters < 1) throw std::runtime_error("adaptive_loop: max_iters must be >= 1");
  pb.validate();

  AdaptResult out;
  auto mesh = std::make_unique<Mesh>(initial);
  P1Function y = P1Function::zeros(*mesh);
  P1Function p = P1Function::zeros(*mesh);
  P0Function u = P0Function::zeros(*mesh);

  for (int it = 1; it <= config.max_iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.cold_start) {
      y = P1Function::zeros(*mesh);
      p = P1Function::zeros(*mesh);
      u = P0Function::zeros(*mesh);
    }
    KktSolution sol;
    try {
      sol = active_set_solve(pb, *mesh, y, p, u, config.quad_assembly_override);
    } catch (const std::exception& err) {
      throw std::runtime_error("adaptive_loop: solver failed at iteration " +
                               std::to_string(it) + ": " + err.what());
    }

    const IndicatorField est_st = indicator_state(*mesh, sol, pb);
    const IndicatorField est_ad = indicator_adjoint(*mesh, sol, pb);
    const IndicatorField est_ct = config.estimator == EstimatorKind::ours
                                      ? indicator_control(*mesh, sol, pb)
                                      : indicator_competitor_control(*mesh, sol);
    const IndicatorField total = indicator_total(est_st, est_ad, est_ct);

    AdaptRecord rec;
    rec.iteration = it;
    const DofMap dm(*mesh);
    rec.ndof = 2LL * dm.n_free + mesh->num_elements();
    rec.est_st = est_st.total();
    rec.est_ad = est_ad.total();
    rec.est_ct = est_ct.total();
    rec.est_total = total.total();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (config.exact) {
      const int deg = error_degree(mesh->dim());
      rec.err_y_h1 = norms(sol.y, config.exact->y, config.exact->grad_y, deg).h1_semi;
      rec.err_p_h1 = norms(sol.p, config.exact->p, config.exact->grad_p, deg).h1_semi;
      rec.err_u_l2 = control_error_l2(*mesh, sol.u, *config.exact, pb);
      rec.err_total = rec.err_y_h1 + rec.err_p_h1 + rec.err_u_l2;
      rec.effectivity = effectivity(rec.est_total, rec.err_total);
    } else {
      rec.err_y_h1 = rec.err_p_h1 = rec.err_u_l2 = rec.err_total = nan;
      rec.effectivity = nan;
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.records.push_back(rec);
    if (config.on_iteration) config.on_iteration(*mesh, sol, total, rec);

    const bool last = it == config.max_iters || rec.est_total <= 1e-12;
    if (last) {
      out.solution = std::move(sol);
      break;
    }

    RefineResult rr = config.refinement == RefinementMode::uniform
                          ? uniform_refine(*mesh)
                          : refine(*mesh, mark_max(total));
    auto fine = std::make_unique<Mesh>(std::move(rr.mesh));
    y = prolong_p1(sol.y, rr.vertex_parents, *fine);
    p = prolong_p1(sol.p, rr.vertex_parents, *fine);
    u = prolong_p0(sol.u, rr.origin, *fine);
    mesh = std::move(fine);
  }
  // The stored solution's fields point into the mesh the unique_ptr owns.
  out.mesh = std::move(mesh);
  return out;
}

void write_csv(std::ostream& os, const std::vector<AdaptRecord>& records) {
  os << "iter,ndof,est_st,est_ad,est_ct,est_total,err_y_h1,err_p_h1,err_u_l2,"
        "err_total,effectivity,seconds\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf,
                  "%d,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.iteration, r.ndof, r.est_st, r.est_ad, r.est_ct, r.est_total,
                  r.err_y_h1, r.err_p_h1, r.err_u_l2, r.err_total, r.effectivity,
                  r.seconds);
    os << buf;
  }
}

std::vector<AdaptRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_csv: missing header");
  std::vector<AdaptRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    // strtod-based field split (istream extraction rejects "nan").
    std::vector<double> f;
    const char* s = line.c_str();
    while (true) {
      char* end = nullptr;
      f.push_back(std::strtod(s, &end));
      if (end == s) throw std::runtime_error("read_csv: malformed row '" + line + "'");
      s = end;
      if (*s != ',') break;
      ++s;
    }
    if (f.size() != 12) throw std::runtime_error("read_csv: wrong column count in '" + line + "'");
    AdaptRecord r;
    r.iteration = static_cast<int>(f[0]);
    r.ndof = static_cast<long long>(f[1]);
    r.est_st = f[2];
    r.est_ad = f[3];
    r.est_ct = f[4];
    r.est_total = f[5];
    r.err_y_h1 = f[6];
    r.err_p_h1 = f[7];
    r.err_u_l2 = f[8];
    r.err_total = f[9];
    r.effectivity = f[10];
    r.seconds = f[11];
    out.push_back(r);
  }
  return out;
}

}  // namespace ocpafem
