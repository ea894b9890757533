#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "ffc/core.hpp"
#include "ffc/data.hpp"

namespace ffc {

struct solver_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MkMode { identity, levenberg_marquardt };

struct SolverConfig {
  double gamma0 = 1e-3;
  double gamma_decay = 0.5;
  double gamma_min = 4e-6;
  double delta0 = 1.0;
  double delta_decay = 0.1;
  double delta_min = 1e-3;
  double beta0 = 1.0;   // beta0/beta1 fixed to 1/2
  double beta1 = 2.0;
  int n_gn = 12;
  int iter_cap = 2000;
  int iter_base = 10;
  double tol = 1e-6;
  double alpha_weight = 10.0;  // per-channel weight for the alpha channels
  MkMode mk_mode = MkMode::levenberg_marquardt;
  double tau0 = 0.0;   // <= 0: estimate 1/||K|| by power iteration
  double mu = 0.5;     // line-search backtracking factor
  // The measurement row of K is scaled by data_scale/sqrt(nx*ny) so the
  // fidelity-regularization balance is independent of the matrix size.
  double data_scale = 4.0;
  int threads = 0;     // 0 = hardware default

  void validate() const;
  /// N_u per-channel regularization weights: alpha_weight on alpha channels.
  std::vector<double> per_channel_weights(int n_e) const;
};

struct IrgnStep {
  double gamma;
  double delta;
  int iters;
};
IrgnStep irgn_schedule(int k, const SolverConfig &cfg);

// Proximal maps of the saddle-point problem. The dual projections are radial
// in the Frobenius magnitude across channels and components.
void prox_dual_z0(GradientField &z, double bound);
void prox_dual_z1(SymGradField &z, double bound);
// c2 > 0 rescales the quadratic data term between operator row and prox:
// the fidelity (1/(2*c2))*||z - dtilde||^2 of the row z = sqrt(c2)*DS*u has
// conjugate prox (xi - sigma*dtilde)/(1 + sigma*c2). c2 = 1 is the plain form.
void prox_dual_r(std::vector<Grid> &r, double sigma, const std::vector<Grid> &dtilde,
                 double c2 = 1.0);
/// real_ch, when given, marks channels constrained to the real subspace
/// (physically real unknowns such as relaxation times); the projection
/// composes exactly with the diagonal quadratic prox.
ChannelStack prox_primal_u(const ChannelStack &xi, double tau, double delta,
                           const std::vector<RealGrid> &mk, const ChannelStack &uk,
                           const std::vector<uint8_t> *real_ch = nullptr);

/// Linearized forward operator pair for the inner problem (k-space valued in
/// reconstruction use; any measurement-shaped space in tests).
struct DsOp {
  std::function<std::vector<Grid>(const ChannelStack &)> apply;
  std::function<ChannelStack(const std::vector<Grid> &)> adjoint;
};

using ProgressLog = std::function<void(const std::string &json_line)>;

struct PdResult {
  ChannelStack u;
  GradientField v;
  int iters = 0;
  double gap = 0.0;       // normalized primal-dual gap at termination
  double fidelity = 0.0;  // 0.5 || DS u - dtilde ||^2
  bool hit_tol = false;
};

/// Primal-dual inner solver with line search (Malitsky-Pock style steps).
/// v0, when given, warm-starts the auxiliary field of the (u, v) pair so the
/// outer loop can carry it between relinearizations.
PdResult pd_linesearch_solve(const DsOp &ds, const std::vector<Grid> &dtilde,
                             const ChannelStack &uk, const std::vector<RealGrid> &mk,
                             double gamma_k, double delta_k, int iter_k,
                             const SolverConfig &cfg, const ProgressLog &log = nullptr,
                             const GradientField *v0 = nullptr,
                             const std::vector<double> *chan_w = nullptr,
                             const std::vector<uint8_t> *real_ch = nullptr);

/// Iteratively regularized Gauss-Newton reconstruction of the parameter maps.
UnknownMaps irgn_reconstruct(const KSpaceSeries &data, const SolverConfig &cfg,
                             const ProgressLog &log = nullptr);

/// Default linearization point: C from the shortest-time highest-field image,
/// alpha = 1, T1 = 0.15 s.
UnknownMaps default_init(const KSpaceSeries &data);

}  // namespace ffc
