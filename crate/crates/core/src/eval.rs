//! Classification metrics. Macro-F1 is the unweighted mean of the complex
//! and non-complex F1 scores; a 0/0 ratio counts as 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// `tp` etc. are taken with the complex class as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn count(gold: &[Label], pred: &[Label]) -> Result<Self> {
        if gold.len() != pred.len() {
            return Err(Error::LengthMismatch {
                gold: gold.len(),
                pred: pred.len(),
            });
        }
        let mut c = Confusion::default();
        for (g, p) in gold.iter().zip(pred) {
            match (g.is_complex(), p.is_complex()) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn scores(tp: usize, fp: usize, fn_: usize) -> ClassScores {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassScores {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }

    pub fn complex(&self) -> ClassScores {
        Self::scores(self.tp, self.fp, self.fn_)
    }

    pub fn non_complex(&self) -> ClassScores {
        Self::scores(self.tn, self.fn_, self.fp)
    }
}

pub fn macro_f1(gold: &[Label], pred: &[Label]) -> Result<f64> {
    let c = Confusion::count(gold, pred)?;
    Ok((c.complex().f1 + c.non_complex().f1) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub complex: ClassScores,
    pub non_complex: ClassScores,
    pub confusion: Confusion,
    /// Optional resources missing during feature extraction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degraded: Vec<String>,
}

pub fn evaluate(gold: &[Label], pred: &[Label]) -> Result<EvalReport> {
    let confusion = Confusion::count(gold, pred)?;
    let complex = confusion.complex();
    let non_complex = confusion.non_complex();
    let n = confusion.total();
    Ok(EvalReport {
        n,
        macro_f1: (complex.f1 + non_complex.f1) / 2.0,
        accuracy: if n == 0 {
            0.0
        } else {
            (confusion.tp + confusion.tn) as f64 / n as f64
        },
        complex,
        non_complex,
        confusion,
        degraded: Vec::new(),
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support")?;
        for (name, s) in [("complex", &self.complex), ("non-complex", &self.non_complex)] {
            writeln!(
                f,
                "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                name, s.precision, s.recall, s.f1, s.support
            )?;
        }
        writeln!(f, "{:<12} {:>9} {:>9} {:>9.4} {:>8}", "macro", "", "", self.macro_f1, self.n)?;
        writeln!(f, "accuracy     {:.4}", self.accuracy)?;
        let c = &self.confusion;
        write!(f, "confusion    tp={} fp={} fn={} tn={}", c.tp, c.fp, c.fn_, c.tn)?;
        if !self.degraded.is_empty() {
            write!(f, "\ndegraded     {}", self.degraded.join(", "))?;
        }
        Ok(())
    }
}
