pub mod bridge;
pub mod conic;
mod decomposition;
pub mod error;
pub mod ft;
pub mod hermitian;
pub mod incompatibility;
pub mod json;
pub mod lhv;
pub mod measurements;
pub mod random;
pub mod steering;

pub use decomposition::STRATEGY_LIMIT;
