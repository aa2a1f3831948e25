pub mod attitude;
pub mod dynamics;
pub mod riccati;
pub mod gaintable;
pub mod control;
pub mod sim;
