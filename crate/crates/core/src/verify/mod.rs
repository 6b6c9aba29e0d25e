//! Numerical checks of the boundedness and lower-bound theorems.

pub mod biconf;
pub mod cotlar;
pub mod fp;
pub mod l2;
pub mod lambda;
pub mod report;

pub use biconf::{biconfinement_decay, separated_gaussians, BiconfinementOptions, ConfinedPair, DecayReport};
pub use cotlar::{cotlar_bound, partition_family, CotlarInput, CotlarReport};
pub use fp::{
    fp_case, fp_decompose, reference_decomposition, stable_order, verify_fp, FpBudgets, FpDecomposition, FpOptions, SweepCase,
};
pub use l2::{adapted_case, adapted_symbol, l2_case, verify_l2, L2Options};
pub use lambda::{verify_lambda_weight, LambdaWeightReport};
pub use report::{BoundReport, SweepReport};
