/// Whether larger or smaller monitored values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Stalled,
    Stop,
}

/// Patience-based stopping rule.
///
/// A value counts as an improvement only when it beats the best so far by
/// more than `min_delta`. After `patience` consecutive non-improving
/// observations the monitor returns [`Verdict::Stop`].
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    goal: Goal,
    best: Option<f64>,
    best_index: usize,
    stalled: usize,
    seen: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64, goal: Goal) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            patience,
            min_delta,
            goal,
            best: None,
            best_index: 0,
            stalled: 0,
            seen: 0,
        }
    }

    pub fn observe(&mut self, value: f64) -> Verdict {
        let index = self.seen;
        self.seen += 1;
        let improved = match self.best {
            None => true,
            Some(best) => match self.goal {
                Goal::Minimize => value < best - self.min_delta,
                Goal::Maximize => value > best + self.min_delta,
            },
        };
        if improved {
            self.best = Some(value);
            self.best_index = index;
            self.stalled = 0;
            Verdict::Improved
        } else {
            self.stalled += 1;
            if self.stalled >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Stalled
            }
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Zero-based index of the best observation.
    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn stalled(&self) -> usize {
        self.stalled
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(stream: &[f64], goal: Goal) -> usize {
        let mut es = EarlyStopping::new(10, 1e-6, goal);
        for (i, &v) in stream.iter().enumerate() {
            if es.observe(v) == Verdict::Stop {
                return i + 1;
            }
        }
        stream.len()
    }

    #[test]
    fn plateau_stops_after_exactly_ten() {
        let mut stream = vec![5.0, 4.0, 3.0];
        stream.extend(std::iter::repeat_n(3.0, 50));
        // 3 improving observations, then 10 stalled
        assert_eq!(run(&stream, Goal::Minimize), 13);
    }

    #[test]
    fn tiny_gains_do_not_count() {
        let stream: Vec<f64> = (0..40).map(|i| 1.0 - i as f64 * 1e-7).collect();
        assert_eq!(run(&stream, Goal::Minimize), 11);
    }

    #[test]
    fn late_improvement_resets_counter() {
        let mut stream = vec![0.5; 9];
        stream.push(0.9);
        stream.extend(std::iter::repeat_n(0.9, 20));
        let mut es = EarlyStopping::new(10, 1e-6, Goal::Maximize);
        let mut stop_at = None;
        for (i, &v) in stream.iter().enumerate() {
            if es.observe(v) == Verdict::Stop {
                stop_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(stop_at, Some(20));
        assert_eq!(es.best_index(), 9);
    }
}
