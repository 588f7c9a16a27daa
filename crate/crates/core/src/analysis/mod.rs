//! Switched-system model of the MCO iteration and numerical checks of its
//! rank, kernel, spectrum and convergence properties.

pub mod blocks;
pub mod linalg;
pub mod spectrum;
pub mod switched;
pub mod theorem;

pub use blocks::{
    build_a, build_ac, build_b, build_e, build_w, stack_state, unstack_state, Branch, SystemMatrices,
};
pub use linalg::{compare_spans, kernel_basis, matrix_csv, numeric_rank, spectral_norm, SpanComparison};
pub use spectrum::{
    eigen_semisimple, is_discrete_semistable, is_paracontracting, predicted_spectrum_a,
    predicted_spectrum_b, semiobservable_family_check, spectral_report, verify_spectrum_containment,
    SpectralReport,
};
pub use switched::{simulate_switched, SwitchMode, SwitchSchedule, SwitchedOutcome, SwitchedStatus};
pub use theorem::{check_rank_lemma, check_theorem_hypotheses, h1_limit, RankLemmaVerdict, TheoremVerdict};
