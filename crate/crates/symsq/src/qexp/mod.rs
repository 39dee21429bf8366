//! Exact q-expansions: eta products and the prime-level newforms they give.

pub mod newform;
pub mod ntt;
pub mod series;

pub use newform::{eta_newform, eta_newform_unchecked, validate_newform, NewformData, ETA_LEVELS};
pub use series::{eta_expansion, IntegerSeries};
