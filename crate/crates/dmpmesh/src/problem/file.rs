//! JSON problem-spec files.
//!
//! ```json
//! {
//!   "diffusivity": {"kind": "rotation_eigen", "d_max": 1000, "d_min": 1, "theta": 1.0472},
//!   "velocity": {"constant": [0.1, 1.0]},
//!   "reaction": {"constant": 1.0},
//!   "source": {"expression": "sin(pi*x)*y"},
//!   "dirichlet": {"values": {"1": 0.0, "2": 1.0}, "default": 0.0},
//!   "length": 1.0
//! }
//! ```
//!
//! Diffusivity kinds: `constant` (entry `d`: 2x2 row-major), `rotation_eigen`,
//! `subsurface`, and `expression` (entries `dxx`, `dxy`, `dyy` in the
//! arithmetic mini-grammar over x and y).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::expr::Expr;
use super::{DiffusivityField, DirichletSpec, ProblemSpec, ScalarField, VectorField};
use crate::{Error, Mat2, Result, Vec2};

#[derive(Deserialize)]
struct ProblemFile {
    diffusivity: DiffusivityEntry,
    #[serde(default)]
    velocity: Option<VectorEntry>,
    #[serde(default)]
    reaction: Option<ScalarEntry>,
    #[serde(default)]
    source: Option<ScalarEntry>,
    dirichlet: DirichletEntry,
    #[serde(default = "default_length")]
    length: f64,
}

fn default_length() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DiffusivityEntry {
    Constant {
        d: [[f64; 2]; 2],
    },
    RotationEigen {
        d_max: f64,
        d_min: f64,
        theta: f64,
    },
    Subsurface {
        v_ref: [f64; 2],
        alpha_t: f64,
        alpha_l: f64,
    },
    Expression {
        dxx: String,
        dxy: String,
        dyy: String,
    },
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum VectorEntry {
    Constant([f64; 2]),
    Expression([String; 2]),
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum ScalarEntry {
    Constant(f64),
    Expression(String),
}

#[derive(Deserialize)]
struct DirichletEntry {
    #[serde(default)]
    values: BTreeMap<String, f64>,
    #[serde(default)]
    default: Option<f64>,
}

/// Parses a problem-spec JSON document.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;

    let diffusivity = match file.diffusivity {
        DiffusivityEntry::Constant { d } => {
            let m = Mat2::new(d[0][0], d[0][1], d[1][0], d[1][1]);
            crate::linalg2::check_spd(&m)?;
            DiffusivityField::Constant(m)
        }
        DiffusivityEntry::RotationEigen {
            d_max,
            d_min,
            theta,
        } => DiffusivityField::rotation_eigen(d_max, d_min, theta)?,
        DiffusivityEntry::Subsurface {
            v_ref,
            alpha_t,
            alpha_l,
        } => DiffusivityField::subsurface(Vec2::new(v_ref[0], v_ref[1]), alpha_t, alpha_l)?,
        DiffusivityEntry::Expression { dxx, dxy, dyy } => {
            let exx = Expr::parse(&dxx)?;
            let exy = Expr::parse(&dxy)?;
            let eyy = Expr::parse(&dyy)?;
            DiffusivityField::callable(move |x| {
                Mat2::new(
                    exx.eval(x.x, x.y),
                    exy.eval(x.x, x.y),
                    exy.eval(x.x, x.y),
                    eyy.eval(x.x, x.y),
                )
            })
        }
    };

    let velocity = match file.velocity {
        None => VectorField::Constant(Vec2::zeros()),
        Some(VectorEntry::Constant([x, y])) => VectorField::Constant(Vec2::new(x, y)),
        Some(VectorEntry::Expression([ex, ey])) => {
            VectorField::Expr(Expr::parse(&ex)?, Expr::parse(&ey)?)
        }
    };
    let scalar = |entry: Option<ScalarEntry>| -> Result<ScalarField> {
        Ok(match entry {
            None => ScalarField::Constant(0.0),
            Some(ScalarEntry::Constant(v)) => ScalarField::Constant(v),
            Some(ScalarEntry::Expression(src)) => ScalarField::Expr(Expr::parse(&src)?),
        })
    };
    let reaction = scalar(file.reaction)?;
    let source = scalar(file.source)?;

    let mut values = BTreeMap::new();
    for (key, value) in file.dirichlet.values {
        let marker: i32 = key
            .parse()
            .map_err(|_| Error::Config(format!("dirichlet marker {key:?} is not an integer")))?;
        values.insert(marker, value);
    }
    let dirichlet = DirichletSpec {
        values,
        default: file.dirichlet.default,
    };

    ProblemSpec::new(
        diffusivity,
        velocity,
        reaction,
        source,
        dirichlet,
        file.length,
    )
}

/// Loads a problem-spec file from disk.
pub fn load_problem(path: &Path) -> Result<ProblemSpec> {
    parse_problem(&std::fs::read_to_string(path)?)
}
