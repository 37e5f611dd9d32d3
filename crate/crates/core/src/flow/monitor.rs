use std::fmt::Write as _;

use super::FlowState;
use crate::field::{GridSpec, PeriodicScalarField, SupNorm, SymTensorField};
use crate::geometry::{induced_metric, lagrangian_angle, volume};

/// Header line of `monitors.csv`.
pub const MONITOR_HEADER: &str =
    "t,max_u,max_du,max_d2u,max_d3u,psi_max,theta_min,theta_max,volume,dt";

/// `ψ = C₀u² + C₁|du|² + |D²u|²` from precomputed jets.
pub fn psi_from_jets(
    u: &PeriodicScalarField,
    du: &SymTensorField,
    d2u: &SymTensorField,
    c0: f64,
    c1: f64,
) -> PeriodicScalarField {
    let du2 = du.norm_sq();
    let d2u2 = d2u.norm_sq();
    let values = u
        .values()
        .iter()
        .zip(du2.values())
        .zip(d2u2.values())
        .map(|((&v, &g), &h)| c0 * v * v + c1 * g + h)
        .collect();
    PeriodicScalarField::from_raw(u.spec().clone(), values)
}

/// One time sample of the tracked scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    pub max_u: f64,
    pub max_du: f64,
    pub max_d2u: f64,
    pub max_d3u: f64,
    pub psi_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub volume: f64,
    pub dt: f64,
}

impl MonitorRecord {
    pub fn from_state(state: &FlowState, c0: f64, c1: f64) -> Self {
        let psi = psi_from_jets(state.u(), state.du(), state.d2u(), c0, c1);
        let theta = lagrangian_angle(state.d2u()).expect("rank-2 jet").theta;
        let metric = induced_metric(state.d2u()).expect("finite jet");
        Self {
            t: state.t(),
            max_u: state.u().sup_norm(),
            max_du: state.du().sup_norm(),
            max_d2u: state.d2u().sup_norm(),
            max_d3u: state.d3u().sup_norm(),
            psi_max: psi.max(),
            theta_min: theta.min(),
            theta_max: theta.max(),
            volume: volume(&metric),
            dt: state.last_dt(),
        }
    }

    /// CSV row in [`MONITOR_HEADER`] order. Floats use the shortest
    /// round-trip representation, so parsing a row reproduces the record.
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.fields().iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{v:e}").unwrap();
        }
        s
    }

    pub fn parse_csv_row(line: &str) -> Option<Self> {
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse().ok())
            .collect::<Option<_>>()?;
        if v.len() != 10 {
            return None;
        }
        Some(Self {
            t: v[0],
            max_u: v[1],
            max_du: v[2],
            max_d2u: v[3],
            max_d3u: v[4],
            psi_max: v[5],
            theta_min: v[6],
            theta_max: v[7],
            volume: v[8],
            dt: v[9],
        })
    }

    fn fields(&self) -> [f64; 10] {
        [
            self.t,
            self.max_u,
            self.max_du,
            self.max_d2u,
            self.max_d3u,
            self.psi_max,
            self.theta_min,
            self.theta_max,
            self.volume,
            self.dt,
        ]
    }

    /// Sign and range invariants every record must satisfy on `grid`.
    pub fn check_invariants(&self, grid: &GridSpec) -> Result<(), String> {
        let n = grid.dim() as f64;
        if self.volume < grid.total_volume() - 1e-10 {
            return Err(format!("volume {} below flat volume", self.volume));
        }
        if self.psi_max < 0.0 {
            return Err(format!("negative psi_max {}", self.psi_max));
        }
        if self.theta_min > self.theta_max {
            return Err("theta_min > theta_max".into());
        }
        let bound = n * std::f64::consts::FRAC_PI_2;
        if self.theta_min.abs() >= bound || self.theta_max.abs() >= bound {
            return Err("|theta| reached n·π/2".into());
        }
        Ok(())
    }
}

/// Receives every emitted record together with the state it describes.
pub trait MonitorSink {
    fn observe(&mut self, state: &FlowState, record: &MonitorRecord);
}

impl MonitorSink for Vec<MonitorRecord> {
    fn observe(&mut self, _state: &FlowState, record: &MonitorRecord) {
        self.push(*record);
    }
}

/// Discards everything.
pub struct NullSink;

impl MonitorSink for NullSink {
    fn observe(&mut self, _state: &FlowState, _record: &MonitorRecord) {}
}

/// Keeps a copy of every observed state next to its record.
#[derive(Debug, Default)]
pub struct StateSampler {
    pub states: Vec<FlowState>,
    pub records: Vec<MonitorRecord>,
}

impl MonitorSink for StateSampler {
    fn observe(&mut self, state: &FlowState, record: &MonitorRecord) {
        self.states.push(state.clone());
        self.records.push(*record);
    }
}

/// Adapts a closure into a sink.
pub struct FnSink<F>(pub F);

impl<F: FnMut(&FlowState, &MonitorRecord)> MonitorSink for FnSink<F> {
    fn observe(&mut self, state: &FlowState, record: &MonitorRecord) {
        (self.0)(state, record)
    }
}
