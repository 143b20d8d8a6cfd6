//! Label-space lifting: labels, data-term envelopes and their prox, dual
//! constraint projections and the subgradient transformation.

pub mod envelope;
pub mod labels;
mod knot_qp;
mod lp;
pub mod piece;
pub mod projection;
pub mod prox;
pub mod transform;

pub use envelope::{build_envelope, envelope_eval, EnvelopeModel};
pub use labels::{check_sublabel_integral, lift, unlift, LabelSet, SublabelIndex};
pub use piece::{Piece, PieceModel};
pub use projection::{project_k_an, project_k_iso, TvKind};
pub use prox::{envelope_prox, ProxReport};
pub use transform::{transform_dual, transform_dual_columns};

/// Cholesky solve of a row-major `m x m` symmetric positive definite system.
pub(crate) fn solve_spd(sys: &mut [f64], rhs: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for j in 0..m {
        let mut d = sys[j * m + j];
        for k in 0..j {
            d -= sys[j * m + k] * sys[j * m + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        sys[j * m + j] = d;
        for i in j + 1..m {
            let mut s = sys[i * m + j];
            for k in 0..j {
                s -= sys[i * m + k] * sys[j * m + k];
            }
            sys[i * m + j] = s / d;
        }
    }
    for i in 0..m {
        let mut s = rhs[i];
        for k in 0..i {
            s -= sys[i * m + k] * rhs[k];
        }
        rhs[i] = s / sys[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = rhs[i];
        for k in i + 1..m {
            s -= sys[k * m + i] * rhs[k];
        }
        rhs[i] = s / sys[i * m + i];
    }
    Some(rhs.to_vec())
}
