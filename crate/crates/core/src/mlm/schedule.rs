//! Learning-rate schedules and pretraining hyperparameter presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScheduleShape {
    /// Linear warmup, then linear decay to `end_frac * peak`.
    WarmupLinearDecay,
    /// Linear warmup, constant plateau, then linear decay.
    Trapezoidal { plateau_frac: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub peak: f64,
    pub warmup_frac: f64,
    pub end_frac: f64,
    pub total_steps: u64,
    pub shape: ScheduleShape,
}

impl LrSchedule {
    pub fn new(peak: f64, total_steps: u64, shape: ScheduleShape) -> Self {
        LrSchedule {
            peak,
            warmup_frac: 0.06,
            end_frac: 0.02,
            total_steps,
            shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak > 0.0 && self.peak.is_finite()) {
            return Err(Error::config("schedule.peak", "must be positive"));
        }
        if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) {
            return Err(Error::config("schedule.warmup_frac", "must be in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.end_frac) {
            return Err(Error::config("schedule.end_frac", "must be in [0, 1]"));
        }
        if self.total_steps == 0 {
            return Err(Error::config("schedule.total_steps", "must be positive"));
        }
        if let ScheduleShape::Trapezoidal { plateau_frac } = self.shape {
            if !(0.0..1.0).contains(&plateau_frac) || self.warmup_frac + plateau_frac > 1.0 {
                return Err(Error::config("schedule.plateau_frac", "warmup plus plateau must fit in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Last warmup step, rounded to a whole step.
    pub fn warmup_steps(&self) -> u64 {
        (self.warmup_frac * self.total_steps as f64).round() as u64
    }

    fn plateau_steps(&self) -> u64 {
        match self.shape {
            ScheduleShape::WarmupLinearDecay => 0,
            ScheduleShape::Trapezoidal { plateau_frac } => {
                let p = (plateau_frac * self.total_steps as f64).round() as u64;
                p.min(self.total_steps - self.warmup_steps())
            }
        }
    }
}

pub fn lr_at_step(s: &LrSchedule, step: u64) -> Result<f64> {
    s.validate()?;
    if step > s.total_steps {
        return Err(Error::Domain(format!("step {step} beyond total_steps {}", s.total_steps)));
    }
    let w = s.warmup_steps();
    if step <= w {
        return Ok(if w == 0 { s.peak } else { s.peak * step as f64 / w as f64 });
    }
    let decay_start = w + s.plateau_steps();
    if step <= decay_start {
        return Ok(s.peak);
    }
    let f = (step - decay_start) as f64 / (s.total_steps - decay_start) as f64;
    let end = s.end_frac * s.peak;
    Ok(s.peak * (1.0 - f) + end * f)
}

pub const PRESET_NAMES: [&str; 3] = ["modernbert-base-pt", "modernbert-base-vx", "mosaicbert-large"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub optimizer: String,
    pub peak_lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub warmup_frac: f64,
    pub end_frac: f64,
    pub mask_rate: f64,
    pub global_batch: u32,
    pub micro_batch: u32,
    pub max_seq_len: u32,
    /// Longest sequence the architecture accepts.
    pub max_supported_seq_len: u32,
    pub sliding_window: Option<u32>,
    pub alibi_start: Option<u32>,
    pub shape: ScheduleShape,
}

pub fn preset(name: &str) -> Result<Preset> {
    let base = Preset {
        name: name.to_string(),
        optimizer: "StableAdamW".into(),
        peak_lr: 3e-4,
        betas: (0.90, 0.98),
        eps: 1e-6,
        warmup_frac: 0.06,
        end_frac: 0.02,
        mask_rate: 0.30,
        global_batch: 4096,
        micro_batch: 128,
        max_seq_len: 1024,
        max_supported_seq_len: 1024,
        sliding_window: Some(256),
        alibi_start: None,
        shape: ScheduleShape::WarmupLinearDecay,
    };
    match name {
        "modernbert-base-pt" | "modernbert-base-vx" => Ok(base),
        "mosaicbert-large" => Ok(Preset {
            peak_lr: 2e-4,
            max_supported_seq_len: 8192,
            sliding_window: None,
            alibi_start: Some(1024),
            shape: ScheduleShape::Trapezoidal { plateau_frac: 0.70 },
            ..base
        }),
        _ => Err(Error::config(
            "preset",
            format!("unknown preset {name:?}; valid presets: {}", PRESET_NAMES.join(", ")),
        )),
    }
}

impl Preset {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("preset.{k}");
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return Err(Error::config(key("mask_rate"), "must be in (0, 1)"));
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return Err(Error::config(key("peak_lr"), "must be positive"));
        }
        for b in [self.betas.0, self.betas.1] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(key("betas"), "must be in [0, 1)"));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::config(key("eps"), "must be positive"));
        }
        if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) {
            return Err(Error::config(key("warmup_frac"), "must be in (0, 1)"));
        }
        if self.micro_batch == 0 || !self.global_batch.is_multiple_of(self.micro_batch) {
            return Err(Error::config(key("micro_batch"), "must divide global_batch"));
        }
        if self.max_seq_len < 3 || self.max_seq_len > self.max_supported_seq_len {
            return Err(Error::config(
                key("max_seq_len"),
                format!("must be in [3, {}]", self.max_supported_seq_len),
            ));
        }
        Ok(())
    }

    pub fn schedule(&self, total_steps: u64) -> LrSchedule {
        LrSchedule {
            peak: self.peak_lr,
            warmup_frac: self.warmup_frac,
            end_frac: self.end_frac,
            total_steps,
            shape: self.shape,
        }
    }

    /// Gradient-accumulation steps so that micro × accumulation × workers = global.
    pub fn accumulation_steps(&self, workers: u32) -> Result<u32> {
        let per_step = self.micro_batch.checked_mul(workers).filter(|&p| p > 0);
        match per_step {
            Some(p) if self.global_batch.is_multiple_of(p) => Ok(self.global_batch / p),
            _ => Err(Error::config(
                "preset.workers",
                format!("{workers} workers x micro {} does not divide global {}", self.micro_batch, self.global_batch),
            )),
        }
    }

    pub fn valid_worker_counts(&self) -> Vec<u32> {
        let n = self.global_batch / self.micro_batch.max(1);
        (1..=n).filter(|w| n.is_multiple_of(*w)).collect()
    }
}
