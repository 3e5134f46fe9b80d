//! Command-line front end and end-to-end pipeline for `atomexp`.

pub mod app;
pub mod pipeline;
