//! Elementary number theory: Euler's φ, multiplicative orders and their
//! prime-power structure, and the constants attached to a pair `(b, h)` and a
//! prime schedule.

mod context;
mod order;

pub use context::{
    alpha, alpha_pow6, build_context, c_tilde, c_tilde_lower_bound, solve_big_r, BaseContext,
    ContextDump, WeightBounds,
};
pub use order::{
    brute_force_order, euler_phi, k_of, multiplicative_order, order_by_crt, order_mod_factored,
    prime_power_order, Factorization,
};

use thiserror::Error;

use crate::radix::RadixError;
use crate::ErrorClass;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumTheoryError {
    #[error("{a} and {n} are not coprime")]
    NotCoprime { a: String, n: String },
    #[error("the prime-power order formula needs an odd prime")]
    EvenPrime,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schedule too short: {0}")]
    ScheduleTooShort(String),
    #[error("index {index} outside {lo}..={hi}")]
    OutOfRange { index: usize, lo: usize, hi: usize },
    #[error(transparent)]
    Radix(#[from] RadixError),
}

impl NumTheoryError {
    pub fn class(&self) -> ErrorClass {
        match self {
            NumTheoryError::Radix(e) => e.class(),
            _ => ErrorClass::Precondition,
        }
    }
}
