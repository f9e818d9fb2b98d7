use serde::{Deserialize, Serialize};

/// Architecture and optimiser settings of the route-set scorer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    /// Hidden units per direction of the route encoder LSTM.
    pub lstm_hidden: usize,
    /// Output width of the dense layer after the LSTM.
    pub route_embedding: usize,
    pub attention_heads: usize,
    /// Query/key/value width of each head.
    pub attention_head_width: usize,
    pub attention_stacks: usize,
    /// Output width of the dense layer closing each attention stack.
    pub attention_output: usize,
    pub head_hidden: usize,
    pub learning_rate: f64,
    /// Minimum final-distance gap for a labelled pair.
    pub margin: f64,
    /// Pairs per optimiser step.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            lstm_hidden: 64,
            route_embedding: 64,
            attention_heads: 8,
            attention_head_width: 128,
            attention_stacks: 1,
            attention_output: 64,
            head_hidden: 128,
            learning_rate: 0.0005,
            margin: 0.01,
            batch_size: 64,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("learning rate {0} outside (0, 1)")]
    LearningRate(f64),
    #[error("margin {0} must be positive")]
    Margin(f64),
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let widths = [
            ("lstm_hidden", self.lstm_hidden),
            ("route_embedding", self.route_embedding),
            ("attention_heads", self.attention_heads),
            ("attention_head_width", self.attention_head_width),
            ("attention_stacks", self.attention_stacks),
            ("attention_output", self.attention_output),
            ("head_hidden", self.head_hidden),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = widths.iter().find(|(_, w)| *w == 0) {
            return Err(ConfigError::NonPositive(name));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(ConfigError::LearningRate(self.learning_rate));
        }
        if !(self.margin > 0.0) {
            return Err(ConfigError::Margin(self.margin));
        }
        Ok(())
    }

    /// A very small network, handy for gradient checks and fast tests.
    pub fn tiny() -> Self {
        Self {
            lstm_hidden: 3,
            route_embedding: 4,
            attention_heads: 2,
            attention_head_width: 3,
            attention_stacks: 2,
            attention_output: 4,
            head_hidden: 5,
            batch_size: 8,
            epochs: 1,
            ..Self::default()
        }
    }
}
