pub mod error;
pub mod params;
pub mod quad;
pub mod specfun;
pub mod states;
pub mod opalg;
pub mod check;
pub mod modouble;
pub mod lax;
pub mod rop;
pub mod sl2c;
pub mod verify;

pub use error::{Error, Result};
pub use params::{make_params, swap_omegas, ModularParams, NumericsConfig, RelationClass, C64};
