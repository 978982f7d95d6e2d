pub mod analyze;
pub mod constants_cmd;
pub mod equilibrium;
pub mod fdi;
pub mod simulate;
