//! Library side of the `multiverse` command: run configs, subcommands and
//! SVG contour rendering.

pub mod commands;
pub mod config;
pub mod svg;
