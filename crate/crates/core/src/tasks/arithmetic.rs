//! Word problems scored by exact integer match.

use std::sync::Arc;

use super::{Instance, Scorer, TaskBundle};
use crate::model::Position;

pub const DESCRIPTION: &str = "Solve grade-school arithmetic word problems. \
The final answer must be a single integer.";

pub const TRAIN_SIZE: usize = 5;

/// The last integer in `answer`, ignoring thousands separators, a trailing
/// full stop or `.0`, and surrounding punctuation.
pub fn parse_integer(answer: &str) -> Option<i64> {
    let token = answer
        .split_whitespace()
        .rev()
        .find(|t| t.contains(|c: char| c.is_ascii_digit()))?;
    let t = token.trim_matches(|c: char| !(c.is_ascii_digit() || c == '-'));
    let t: String = t.chars().filter(|&c| c != ',').collect();
    let t = match t.split_once('.') {
        Some((int, frac)) if !frac.is_empty() && frac.chars().all(|c| c == '0') => int.to_string(),
        Some(_) => return None,
        None => t,
    };
    t.parse::<i64>().ok()
}

pub struct ExactInteger;

impl Scorer for ExactInteger {
    fn id(&self) -> &str {
        "exact_integer"
    }

    fn score(&self, instance: &Instance, answer: &str, _pos: &Position) -> (f64, Option<String>) {
        let Some(expected) = instance.reference.get("answer").and_then(|v| v.as_i64()) else {
            return (
                0.0,
                Some(format!(
                    "instance `{}` has no integer reference",
                    instance.id
                )),
            );
        };
        match parse_integer(answer) {
            Some(got) if got == expected => (1.0, None),
            Some(got) => (
                0.0,
                Some(format!("expected {expected}, the answer gave {got}")),
            ),
            None => (
                0.0,
                Some(format!(
                    "expected {expected}, the answer contains no integer"
                )),
            ),
        }
    }
}

pub fn instances() -> Vec<Instance> {
    serde_json::from_str(include_str!("../../data/tasks/arithmetic.json"))
        .expect("bundled arithmetic data parses")
}

pub fn bundle() -> TaskBundle {
    let mut all = instances();
    let eval = all.split_off(TRAIN_SIZE);
    TaskBundle {
        id: "arithmetic".into(),
        description: DESCRIPTION.into(),
        train: all,
        eval,
        scorer: Arc::new(ExactInteger),
    }
}
