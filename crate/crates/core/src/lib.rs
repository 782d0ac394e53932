pub mod cluster;
pub mod control;
pub mod data;
pub mod nldr;
pub mod session;
pub mod tour;
