#include "cavsim/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cavsim {

Reference reference(double t_since_entry, const ReferenceConfig& ref,
                    const ControlParams& params, std::optional<double> v_ref_override) {
  Reference out;
  out.v_ref = v_ref_override.value_or(params.v_max);
  if (ref.mode == "linear")
    out.u_ref = ref.a * t_since_entry + ref.b;
  else
    out.u_ref = 0.0;
  out.u_ref = std::clamp(out.u_ref, params.u_min, params.u_max);
  return out;
}

double CbfRow::barrier(const std::array<double, 4>& y) const {
  double b = form.b_const;
  for (int k = 0; k < 4; ++k) b += form.b_coef[size_t(k)] * y[size_t(k)];
  return b;
}

double CbfRow::drift(const std::array<double, 4>& y) const {
  double f = form.f_const;
  for (int k = 0; k < 4; ++k) f += form.f_coef[size_t(k)] * y[size_t(k)];
  return f;
}

double CbfRow::noise_margin_b(double eps1) const {
  double m = 0.0;
  for (int k = 0; k < form.noisy_dims; ++k) m += std::abs(form.b_coef[size_t(k)]);
  return m * eps1;
}

double CbfRow::noise_margin_f(double eps1) const {
  double m = 0.0;
  for (int k = 0; k < form.noisy_dims; ++k) m += std::abs(form.f_coef[size_t(k)]);
  return m * eps1;
}

CbfRow make_rear_row(const PeerView& peer, double x_self, double v_self,
                     const ControlParams& params, bool trust_aware) {
  CbfRow row;
  row.kind = peer.kind;
  row.peer = peer.id;
  row.mp = peer.mp;
  // b = x_p - x_i + offset - phi v_i - Delta; bdot = v_p - v_i - phi u.
  row.form.b_coef = {-1.0, -params.phi, 1.0, 0.0};
  row.form.b_const = peer.gap_offset - params.big_delta;
  row.form.f_coef = {0.0, -1.0, 0.0, 1.0};
  row.form.g_coef = -params.phi;
  row.anchor = {x_self, v_self, peer.x_hat, peer.v_hat};
  row.tau = peer.tau;
  row.trust_scaled = trust_aware;
  row.class_k = trust_aware ? params.class_k_trust : params.class_k_for(peer.kind);
  return row;
}

CbfRow make_vmin_row(double v_self, const ControlParams& params) {
  CbfRow row;
  row.kind = ConstraintKind::VMin;
  row.form.b_coef = {0.0, 1.0, 0.0, 0.0};
  row.form.b_const = -params.v_min;
  row.form.g_coef = 1.0;
  row.anchor = {0.0, v_self, 0.0, 0.0};
  row.trust_scaled = false;
  row.class_k = params.class_k_for(ConstraintKind::VMin);
  return row;
}

CbfRow make_vmax_row(double v_self, const ControlParams& params) {
  CbfRow row;
  row.kind = ConstraintKind::VMax;
  row.form.b_coef = {0.0, -1.0, 0.0, 0.0};
  row.form.b_const = params.v_max;
  row.form.g_coef = -1.0;
  row.anchor = {0.0, v_self, 0.0, 0.0};
  row.trust_scaled = false;
  row.class_k = params.class_k_for(ConstraintKind::VMax);
  return row;
}

LinearControlConstraint nominal_row(const CbfRow& row) {
  double b = row.barrier(row.anchor);
  double kappa = row.class_k * (row.trust_scaled ? row.tau : 1.0) * b;
  LinearControlConstraint c;
  c.kind = row.kind;
  c.peer = row.peer;
  c.mp = row.mp;
  c.a_u = row.form.g_coef;
  c.a_e = 0.0;
  c.sense = Sense::Ge;
  c.rhs = -(row.drift(row.anchor) + kappa);
  return c;
}

std::vector<LinearControlConstraint> build_constraints(
    double x_self, double v_self, const std::vector<PeerView>& peers, Reference ref,
    const ControlParams& params, const BuildOptions& opts,
    std::vector<CbfRow>* rows_out) {
  std::vector<LinearControlConstraint> rows;
  std::vector<CbfRow> cbf;

  for (const auto& peer : peers)
    cbf.push_back(make_rear_row(peer, x_self, v_self, params, opts.trust_aware));
  if (opts.include_vmin && params.v_min > 0.0)
    cbf.push_back(make_vmin_row(v_self, params));
  cbf.push_back(make_vmax_row(v_self, params));

  for (const auto& row : cbf) rows.push_back(nominal_row(row));

  // Control bounds.
  LinearControlConstraint umax;
  umax.kind = ConstraintKind::UMax;
  umax.a_u = 1.0;
  umax.sense = Sense::Le;
  umax.rhs = params.u_max;
  rows.push_back(umax);
  LinearControlConstraint umin;
  umin.kind = ConstraintKind::UMin;
  umin.a_u = 1.0;
  umin.sense = Sense::Ge;
  umin.rhs = params.u_min;
  rows.push_back(umin);

  // CLF: 2 (v - v_ref) u + c V - e <= 0.
  double dv = v_self - ref.v_ref;
  LinearControlConstraint clf;
  clf.kind = ConstraintKind::Clf;
  clf.a_u = 2.0 * dv;
  clf.a_e = -1.0;
  clf.sense = Sense::Le;
  clf.rhs = -params.c_clf * dv * dv;
  rows.push_back(clf);

  if (rows_out) *rows_out = std::move(cbf);
  return rows;
}

namespace {

// Exact extrema of an affine function over the anchor box; attained at corners.
double box_min(const std::array<double, 4>& coef, double constant,
               const std::array<double, 4>& anchor, const RowBoxes& boxes) {
  std::array<double, 4> half = {boxes.self_pos, boxes.self_vel, boxes.peer_pos,
                                boxes.peer_vel};
  double m = constant;
  for (int k = 0; k < 4; ++k) {
    double c = coef[size_t(k)];
    m += c * anchor[size_t(k)] - std::abs(c) * half[size_t(k)];
  }
  return m;
}

}  // namespace

RobustMinima robust_event_minima(const CbfRow& row, const RowBoxes& boxes, double u_sign) {
  RobustMinima out;
  out.b_f_min = box_min(row.form.f_coef, row.form.f_const, row.anchor, boxes) -
                row.noise_margin_f(boxes.eps1);

  // The control direction is constant for every row in this problem; the sign
  // split is kept for fidelity with the event formulation.
  out.b_g_min = row.form.g_coef;
  (void)u_sign;

  double floor_min = box_min(row.form.b_coef, row.form.b_const, row.anchor, boxes) -
                     row.noise_margin_b(boxes.eps1);
  double anchor_floor = row.barrier(row.anchor) - row.noise_margin_b(boxes.eps1);
  out.anchor_in_safe_set = anchor_floor >= 0.0;
  // Points of the box outside the robust safe set project onto its boundary,
  // where the barrier is zero.
  double clamped = std::max(0.0, floor_min);
  double tau_lo = row.trust_scaled ? std::max(0.0, boxes.tau_lo) : 1.0;
  out.b_kappa_min = row.class_k * tau_lo * clamped;
  return out;
}

LinearControlConstraint event_row(const CbfRow& row, const RobustMinima& minima) {
  LinearControlConstraint c;
  c.kind = row.kind;
  c.peer = row.peer;
  c.mp = row.mp;
  c.a_u = minima.b_g_min;
  c.a_e = 0.0;
  c.sense = Sense::Ge;
  c.rhs = -(minima.b_f_min + minima.b_kappa_min);
  return c;
}

QpResult solve_qp(const std::vector<LinearControlConstraint>& rows, double u_ref,
                  double lambda) {
  // Canonical form: alpha u + beta e <= c.
  struct Half {
    double alpha, beta, c;
  };
  std::vector<Half> hs;
  hs.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.sense == Sense::Le)
      hs.push_back({r.a_u, r.a_e, r.rhs});
    else
      hs.push_back({-r.a_u, -r.a_e, -r.rhs});
  }

  auto feasible = [&](double u, double e) {
    for (const auto& h : hs) {
      double tol = 1e-8 + 1e-12 * std::abs(h.c);
      if (h.alpha * u + h.beta * e > h.c + tol) return false;
    }
    return true;
  };
  auto objective = [&](double u, double e) {
    double du = u - u_ref;
    return 0.5 * du * du + lambda * e * e;
  };

  QpResult best;
  best.objective = std::numeric_limits<double>::infinity();
  auto consider = [&](double u, double e) {
    if (!std::isfinite(u) || !std::isfinite(e)) return;
    if (!feasible(u, e)) return;
    double obj = objective(u, e);
    if (obj < best.objective) {
      best = {u, e, QpStatus::Optimal, obj};
    }
  };

  // Unconstrained optimum.
  consider(u_ref, 0.0);

  // One active row: minimize on the hyperplane alpha u + beta e = c.
  for (const auto& h : hs) {
    double denom = h.alpha * h.alpha + h.beta * h.beta / (2.0 * lambda);
    if (denom < 1e-14) continue;
    double mu = (h.c - h.alpha * u_ref) / denom;
    consider(u_ref + mu * h.alpha, mu * h.beta / (2.0 * lambda));
  }

  // Two active rows: vertex of the pair.
  for (size_t i = 0; i < hs.size(); ++i) {
    for (size_t j = i + 1; j < hs.size(); ++j) {
      double det = hs[i].alpha * hs[j].beta - hs[j].alpha * hs[i].beta;
      if (std::abs(det) < 1e-12) continue;
      double u = (hs[i].c * hs[j].beta - hs[j].c * hs[i].beta) / det;
      double e = (hs[i].alpha * hs[j].c - hs[j].alpha * hs[i].c) / det;
      consider(u, e);
    }
  }

  return best;
}

std::optional<std::string> should_trigger(const EventAnchor& anchor, double x_hat,
                                          double v_hat,
                                          const std::map<PeerKey, PeerSnapshot>& peers,
                                          const EventParams& event, double eps1) {
  if (!anchor.valid) return "entry";

  if (peers.size() != anchor.peers.size()) return "peer-set-change";
  for (const auto& [key, snap] : peers) {
    auto it = anchor.peers.find(key);
    if (it == anchor.peers.end()) return "peer-set-change";
    if (std::abs(it->second.gap_offset - snap.gap_offset) > 1e-9)
      return "peer-set-change";
  }

  double tx = event.s_x[0] - 2.0 * eps1;
  double tv = event.s_x[1] - 2.0 * eps1;
  if (std::abs(x_hat - anchor.x_hat) >= tx || std::abs(v_hat - anchor.v_hat) >= tv)
    return "self-drift";
  for (const auto& [key, snap] : peers) {
    const PeerSnapshot& a = anchor.peers.at(key);
    if (std::abs(snap.x_hat - a.x_hat) >= tx || std::abs(snap.v_hat - a.v_hat) >= tv)
      return "peer-drift";
    if (std::abs(snap.tau - a.tau) >= event.s_tau) return "trust-drift";
  }
  return std::nullopt;
}

}  // namespace cavsim
