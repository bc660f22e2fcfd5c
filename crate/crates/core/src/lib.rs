pub mod action;
pub mod agent;
pub mod bench;
pub mod gateway;
pub mod geom;
pub mod gui;
pub mod sim;
