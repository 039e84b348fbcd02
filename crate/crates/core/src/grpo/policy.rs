use std::sync::Arc;

use rand::Rng;

use crate::error::PolicyError;

/// Ordered symbol set with one distinguished stop symbol.
///
/// The stop symbol's text is never emitted when decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    stop: usize,
}

impl Vocabulary {
    pub fn new(symbols: Vec<String>, stop: usize) -> Result<Self, PolicyError> {
        if stop >= symbols.len() {
            return Err(PolicyError::UnknownSymbol {
                symbol: stop,
                vocab_size: symbols.len(),
            });
        }
        Ok(Self { symbols, stop })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn stop(&self) -> usize {
        self.stop
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, text: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == text)
    }

    pub fn decode(&self, tokens: &[usize]) -> String {
        tokens
            .iter()
            .filter(|&&t| t != self.stop)
            .filter_map(|&t| self.symbol(t))
            .collect()
    }

    /// Greedy longest-match tokenization. The stop symbol never matches.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>, PolicyError> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            let best = self
                .symbols
                .iter()
                .enumerate()
                .filter(|(i, s)| *i != self.stop && !s.is_empty() && rest.starts_with(s.as_str()))
                .max_by_key(|(_, s)| s.len())
                .ok_or(PolicyError::Untokenizable(pos))?;
            out.push(best.0);
            pos += best.1.len();
        }
        Ok(out)
    }
}

/// Position of a decision: the previous symbol (`None` at the start of the
/// sequence) and the zero-based position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Context {
    pub prev: Option<usize>,
    pub position: usize,
}

impl Context {
    /// Context of the `t`-th token of `tokens`.
    pub fn of(tokens: &[usize], t: usize) -> Self {
        Self {
            prev: t.checked_sub(1).map(|i| tokens[i]),
            position: t,
        }
    }
}

/// Tabular bigram policy: one logit vector per (previous symbol, position).
///
/// Parameters are laid out row-major as `[context][position][symbol]`, with
/// context index `V` standing for the start of the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    vocab: Arc<Vocabulary>,
    max_length: usize,
    logits: Vec<f64>,
}

pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    row.iter().map(|&x| x - lse).collect()
}

impl ToyPolicy {
    pub fn uniform(vocab: Arc<Vocabulary>, max_length: usize) -> Self {
        let n = (vocab.len() + 1) * max_length * vocab.len();
        Self {
            vocab,
            max_length,
            logits: vec![0.0; n],
        }
    }

    pub fn from_logits(
        vocab: Arc<Vocabulary>,
        max_length: usize,
        logits: Vec<f64>,
    ) -> Result<Self, PolicyError> {
        let expected = (vocab.len() + 1) * max_length * vocab.len();
        if logits.len() != expected {
            return Err(PolicyError::ShapeMismatch(format!(
                "expected {expected} logits, got {}",
                logits.len()
            )));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(PolicyError::InvalidConfig("logits must be finite".into()));
        }
        Ok(Self {
            vocab,
            max_length,
            logits,
        })
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(
        vocab: Arc<Vocabulary>,
        max_length: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::uniform(vocab, max_length);
        for x in &mut p.logits {
            *x = rng.random_range(-scale..=scale);
        }
        p
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn params(&self) -> &[f64] {
        &self.logits
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn num_params(&self) -> usize {
        self.logits.len()
    }

    /// Offset of the logit row for `ctx`.
    pub fn row_offset(&self, ctx: Context) -> usize {
        let v = self.vocab.len();
        let c = ctx.prev.unwrap_or(v);
        (c * self.max_length + ctx.position) * v
    }

    pub fn row(&self, ctx: Context) -> &[f64] {
        let o = self.row_offset(ctx);
        &self.logits[o..o + self.vocab.len()]
    }

    pub fn row_mut(&mut self, ctx: Context) -> &mut [f64] {
        let o = self.row_offset(ctx);
        let v = self.vocab.len();
        &mut self.logits[o..o + v]
    }

    pub fn probs(&self, ctx: Context) -> Vec<f64> {
        softmax(self.row(ctx))
    }

    pub fn log_probs(&self, ctx: Context) -> Vec<f64> {
        log_softmax(self.row(ctx))
    }

    pub fn check_same_shape(&self, other: &ToyPolicy) -> Result<(), PolicyError> {
        if self.vocab.len() != other.vocab.len() || self.max_length != other.max_length {
            return Err(PolicyError::ShapeMismatch(format!(
                "V={} L={} vs V={} L={}",
                self.vocab.len(),
                self.max_length,
                other.vocab.len(),
                other.max_length
            )));
        }
        Ok(())
    }

    pub fn check_sequence(&self, tokens: &[usize]) -> Result<(), PolicyError> {
        if tokens.len() > self.max_length {
            return Err(PolicyError::TargetTooLong {
                len: tokens.len(),
                max: self.max_length,
            });
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.vocab.len()) {
            return Err(PolicyError::UnknownSymbol {
                symbol: bad,
                vocab_size: self.vocab.len(),
            });
        }
        Ok(())
    }

    /// Draws one completion. Sampling stops after the stop symbol or at
    /// `max_length` tokens; the stop symbol is kept in the trajectory.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut tokens = Vec::with_capacity(self.max_length);
        for t in 0..self.max_length {
            let probs = self.probs(Context::of(&tokens, t));
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            tokens.push(pick);
            if pick == self.vocab.stop() {
                break;
            }
        }
        tokens
    }

    pub fn sequence_log_prob(&self, tokens: &[usize]) -> Result<f64, PolicyError> {
        self.check_sequence(tokens)?;
        Ok((0..tokens.len())
            .map(|t| self.log_probs(Context::of(tokens, t))[tokens[t]])
            .sum())
    }

    pub fn max_abs_diff(&self, other: &ToyPolicy) -> f64 {
        self.logits
            .iter()
            .zip(&other.logits)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `params -= step * grad`.
    pub fn descend(&mut self, grad: &[f64], step: f64) {
        for (p, g) in self.logits.iter_mut().zip(grad) {
            *p -= step * g;
        }
    }
}
