//! Weighted age–happiness curve estimation.
//!
//! Survey microdata are loaded and filtered ([`dataset`]), turned into
//! dummy-coded design matrices ([`design`]) and fitted by weighted least
//! squares ([`wls`]). Model presets and adjusted age curves live in
//! [`models`], u-shape rules and curve metrics in [`shape`], and synthetic
//! bias experiments in [`simulate`]. [`output`] and [`chart`] write
//! CSV, text tables and SVG; [`config`] reads run configuration files.

pub mod chart;
pub mod config;
pub mod dataset;
pub mod design;
pub mod error;
pub mod fixtures;
pub mod models;
pub mod output;
pub mod shape;
pub mod simulate;
pub mod wls;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/data.md")]
    struct Data;
    #[doc = include_str!("../../../book/src/design.md")]
    struct Design;
    #[doc = include_str!("../../../book/src/wls.md")]
    struct Wls;
    #[doc = include_str!("../../../book/src/models.md")]
    struct Models;
    #[doc = include_str!("../../../book/src/shape.md")]
    struct Shape;
    #[doc = include_str!("../../../book/src/simulate.md")]
    struct Simulate;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
