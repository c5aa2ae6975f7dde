//! Spectral radius algebras `B_T` and `Q_T`.

pub mod blocks;
pub mod criteria;
pub mod membership;
pub mod rank_one;
pub mod rm;

pub use blocks::{block_decompose, BlockDecomp};
pub use criteria::{
    bt_equals_full, bt_member_divergence_criterion, isometry_multiple_check,
    nilpotent_invariant_subspace, qt_member_divergence_criterion, sup_condition,
    FullAlgebraCheck, IsometryCheck,
};
pub use membership::{
    bt_member_definitional, bt_member_kernel_criterion, classify_bounded, classify_decay,
    bt_kernel_criterion_with, conjugation_norms, qt_criterion, qt_member, qt_member_with,
    MembershipVerdict, QtMembership, Verdict,
};
pub use rank_one::{
    rank_one_bt_criterion, rank_one_bt_invariance, rank_one_in_bt_wce, rank_one_qt,
    rank_one_qt_criterion,
};
pub use rm::{rank_one_rm, rm_closed, rm_inverse, rm_series, RmFamily, RmSource};
