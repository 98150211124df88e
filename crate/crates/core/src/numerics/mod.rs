//! Dense complex linear algebra and a small-scale SDP solver.

mod herm;
mod sdp;

pub use herm::{
    herm_eig, herm_nullspace_direction, numerical_rank, psd_factor, real_compress, real_embed,
    HermEigen, HermitianMatrix, HERMITIAN_TOL, NULLSPACE_TOL, PSD_TOL, RANK_TOL,
};
pub use sdp::{
    solve_sdp_with, solve_small_sdp, SdpConstraint, SdpMetrics, SdpProblem, SdpSettings,
    SdpSolution, SdpStatus, Sense, INFEASIBILITY_TOL, MAX_DIM,
};
