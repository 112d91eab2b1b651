pub mod commands;
pub mod exec;
pub mod manifest;
pub mod selftest;
