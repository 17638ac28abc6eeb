#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "cavsim/model.hpp"

namespace cavsim {

// Reference generation: either track the speed limit through the CLF, or an
// affine control reference in time since CZ entry.
struct Reference {
  double u_ref = 0.0;
  double v_ref = 0.0;
};
Reference reference(double t_since_entry, const ReferenceConfig& ref,
                    const ControlParams& params,
                    std::optional<double> v_ref_override = std::nullopt);

// A peer as seen by one controller after packet/perception fusion.
// gap = x_hat_peer - x_hat_self + gap_offset is the common-coordinate distance.
struct PeerView {
  int id = 0;
  double x_hat = 0.0;
  double v_hat = 0.0;
  double tau = 0.0;
  ConstraintKind kind = ConstraintKind::RearEnd;  // RearEnd or Merging
  std::optional<int> mp;
  double gap_offset = 0.0;
};

// Barrier written over (x_self, v_self, x_peer, v_peer); all rows in this
// problem are affine in the state with constant control direction.
struct AffineBarrier {
  std::array<double, 4> b_coef{};  // coefficients of b
  double b_const = 0.0;
  std::array<double, 4> f_coef{};  // coefficients of L_f b
  double f_const = 0.0;
  double g_coef = 0.0;             // L_g b
  int noisy_dims = 4;              // leading dims subject to measurement noise
};

// One CBF row with its anchor point and class-K configuration.
struct CbfRow {
  ConstraintKind kind = ConstraintKind::RearEnd;
  std::optional<int> peer;
  std::optional<int> mp;
  AffineBarrier form;
  std::array<double, 4> anchor{};  // (x_self, v_self, x_peer, v_peer) estimates
  double tau = 1.0;                // peer trust at the anchor
  bool trust_scaled = false;       // class-K term is c * tau * b
  double class_k = 0.1;

  double barrier(const std::array<double, 4>& y) const;
  double drift(const std::array<double, 4>& y) const;  // L_f b
  double noise_margin_b(double eps1) const;
  double noise_margin_f(double eps1) const;
};

CbfRow make_rear_row(const PeerView& peer, double x_self, double v_self,
                     const ControlParams& params, bool trust_aware);
CbfRow make_vmin_row(double v_self, const ControlParams& params);
CbfRow make_vmax_row(double v_self, const ControlParams& params);

// Nominal (anchor-point, noise-free) linearization of a row.
LinearControlConstraint nominal_row(const CbfRow& row);

// Full nominal constraint list: one rear/merging row per peer, speed rows,
// control bounds, and the CLF row with slack coefficient -1.
struct BuildOptions {
  bool trust_aware = true;
  bool include_vmin = true;  // dropped when v_min == 0 (the plant enforces it)
};
std::vector<LinearControlConstraint> build_constraints(
    double x_self, double v_self, const std::vector<PeerView>& peers, Reference ref,
    const ControlParams& params, const BuildOptions& opts,
    std::vector<CbfRow>* rows_out = nullptr);

// Event boxes around the anchored estimates; the closed-form minima of every
// row term are attained at box corners because all terms are affine (the
// class-K term is a product of box-separable monotone factors).
struct RowBoxes {
  double self_pos = 0.0;
  double self_vel = 0.0;
  double peer_pos = 0.0;
  double peer_vel = 0.0;
  double tau_lo = 0.0;
  double tau_hi = 1.0;
  double eps1 = 0.0;
};

struct RobustMinima {
  double b_f_min = 0.0;
  double b_g_min = 0.0;
  double b_kappa_min = 0.0;
  bool anchor_in_safe_set = true;  // robust barrier floor >= 0 at the anchor
};

// u_sign comes from a provisional QP solve; it selects min vs max for the
// control-direction term.
RobustMinima robust_event_minima(const CbfRow& row, const RowBoxes& boxes, double u_sign);

LinearControlConstraint event_row(const CbfRow& row, const RobustMinima& minima);

// Small dense QP in (u, e): minimize 1/2 (u - u_ref)^2 + lambda e^2 subject to
// affine rows. Solved exactly by enumerating active subsets.
enum class QpStatus : uint8_t { Optimal, Infeasible };

struct QpResult {
  double u = 0.0;
  double e = 0.0;
  QpStatus status = QpStatus::Infeasible;
  double objective = 0.0;
};

QpResult solve_qp(const std::vector<LinearControlConstraint>& rows, double u_ref,
                  double lambda);

// ---------------------------------------------------------------------------
// Event anchor and trigger test
// ---------------------------------------------------------------------------

// A peer can constrain the same vehicle through several rows (rear-end plus
// one per shared merging point), so snapshots are keyed by (id, kind, mp).
using PeerKey = std::tuple<int, int, int>;
inline PeerKey make_peer_key(int id, ConstraintKind kind, std::optional<int> mp) {
  return {id, int(kind), mp.value_or(-1)};
}

struct PeerSnapshot {
  double x_hat = 0.0;
  double v_hat = 0.0;
  double tau = 0.0;
  double gap_offset = 0.0;
  ConstraintKind kind = ConstraintKind::RearEnd;
  std::optional<int> mp;
};

struct EventAnchor {
  bool valid = false;
  double t = 0.0;
  double x_hat = 0.0;
  double v_hat = 0.0;
  std::map<PeerKey, PeerSnapshot> peers;
  double u_held = 0.0;
  double e_slack = 0.0;
};

// Returns the trigger reason, or nullopt while the held control remains valid.
// Thresholds are s_x - 2*eps1 on estimate drift (componentwise, inclusive) and
// s_tau on peer trust drift; any peer-set or role change fires immediately.
std::optional<std::string> should_trigger(const EventAnchor& anchor, double x_hat,
                                          double v_hat,
                                          const std::map<PeerKey, PeerSnapshot>& peers,
                                          const EventParams& event, double eps1);

}  // namespace cavsim
