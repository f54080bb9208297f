//! Question answering across a ring of views.

use serde::{Deserialize, Serialize};

use super::{percent, MetricError, MetricScore, Result};
use crate::backends::QAItem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub n_views: usize,
    /// Cyclic neighborhood radius; the window always includes the view itself.
    pub adjacency_radius: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            n_views: 12,
            adjacency_radius: 1,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_views < 3 {
            return Err(MetricError::Config(format!(
                "alignment needs at least 3 views, got {}",
                self.n_views
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignEvidence {
    /// `correct[j][i]`: question `j` answered with its gold answer at view `i`.
    pub correct: Vec<Vec<bool>>,
    pub passed: Vec<bool>,
}

/// Whether some view's cyclic window of `radius` is entirely correct.
pub fn window_all_correct(correct: &[bool], radius: usize) -> bool {
    let n = correct.len();
    if n == 0 {
        return false;
    }
    let r = radius.min(n / 2) as isize;
    (0..n as isize).any(|i| (-r..=r).all(|d| correct[(i + d).rem_euclid(n as isize) as usize]))
}

/// `answers[j][i]` is the answer to question `j` at view `i`; `None` counts
/// as a wrong answer.
pub fn text_3d_alignment(
    qa: &[QAItem],
    answers: &[Vec<Option<String>>],
    cfg: &AlignConfig,
) -> Result<MetricScore<AlignEvidence>> {
    cfg.validate()?;
    if qa.is_empty() {
        return Err(MetricError::NoQuestions);
    }
    if answers.len() != qa.len() || answers.iter().any(|row| row.len() != cfg.n_views) {
        return Err(MetricError::Shape(format!(
            "expected {} × {} answers",
            qa.len(),
            cfg.n_views
        )));
    }
    let correct: Vec<Vec<bool>> = qa
        .iter()
        .zip(answers)
        .map(|(q, row)| {
            row.iter()
                .map(|a| a.as_deref() == Some(q.gold.as_str()))
                .collect()
        })
        .collect();
    let passed: Vec<bool> = correct
        .iter()
        .map(|c| window_all_correct(c, cfg.adjacency_radius))
        .collect();
    Ok(MetricScore {
        value: percent(passed.iter().filter(|&&p| p).count(), qa.len()),
        evidence: AlignEvidence { correct, passed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn yes_no() -> QAItem {
        QAItem {
            question: "Is there a statue?".into(),
            choices: vec!["yes".into(), "no".into()],
            gold: "yes".into(),
        }
    }

    fn row(correct_at: &[usize]) -> Vec<Option<String>> {
        (0..12)
            .map(|i| Some(if correct_at.contains(&i) { "yes" } else { "no" }.to_string()))
            .collect()
    }

    #[test]
    fn all_gold_scores_full() {
        let s = text_3d_alignment(
            &[yes_no()],
            &[row(&(0..12).collect::<Vec<_>>())],
            &AlignConfig::default(),
        )
        .unwrap();
        assert_eq!(s.value, 100.0);
    }

    #[test]
    fn isolated_view_fails_and_arc_passes() {
        let qa = [yes_no(), yes_no()];
        let s = text_3d_alignment(
            &qa,
            &[row(&[5]), row(&(0..12).collect::<Vec<_>>())],
            &AlignConfig::default(),
        )
        .unwrap();
        assert_eq!(s.value, 50.0);
        let s =
            text_3d_alignment(&[yes_no()], &[row(&[4, 5, 6])], &AlignConfig::default()).unwrap();
        assert_eq!(s.value, 100.0);
        // wraps around the ring
        let s =
            text_3d_alignment(&[yes_no()], &[row(&[11, 0, 1])], &AlignConfig::default()).unwrap();
        assert_eq!(s.value, 100.0);
    }

    #[test]
    fn missing_answers_are_wrong() {
        let mut r = row(&(0..12).collect::<Vec<_>>());
        for (i, a) in r.iter_mut().enumerate() {
            if i % 2 == 0 {
                *a = None;
            }
        }
        let s = text_3d_alignment(&[yes_no()], &[r], &AlignConfig::default()).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn empty_questions_error() {
        assert!(matches!(
            text_3d_alignment(&[], &[], &AlignConfig::default()),
            Err(MetricError::NoQuestions)
        ));
    }

    #[test]
    fn truth_table_matches_enumeration() {
        for radius in [0usize, 1] {
            for pattern in 0u32..1 << 12 {
                let c: Vec<bool> = (0..12).map(|i| pattern >> i & 1 == 1).collect();
                let mut expect = false;
                for i in 0..12i32 {
                    let mut all = true;
                    for d in -(radius as i32)..=radius as i32 {
                        all &= c[(i + d).rem_euclid(12) as usize];
                    }
                    expect |= all;
                }
                assert_eq!(
                    window_all_correct(&c, radius),
                    expect,
                    "{pattern:012b} r={radius}"
                );
            }
        }
    }
}
