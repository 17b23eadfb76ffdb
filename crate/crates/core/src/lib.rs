pub mod config;
pub mod dynamics;
pub mod geometry;
pub mod projection;
pub mod tensor;
pub mod tucker;
