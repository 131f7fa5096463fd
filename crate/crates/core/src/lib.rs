//! Streaming anomaly detection over two coupled feature streams.
//!
//! A presenter stream of *action* features (probability distributions over
//! action classes) and an audience stream of *interaction* features
//! (normalized comment counts plus auxiliary channels) are modeled jointly by
//! a coupled pair of LSTM layers. Each segment is scored by how badly the
//! model reconstructs it from the preceding `q` segments:
//!
//! * `re_i` — Jensen–Shannon divergence between the action feature and its
//!   reconstruction, in nats;
//! * `re_a` — Euclidean distance between the interaction feature and its
//!   reconstruction;
//! * `re_ia = ω·re_i + (1-ω)·re_a` — the anomaly score, compared against `τ`.
//!
//! Computing `re_i` exactly for every segment is avoided where cheaper upper
//! and lower bounds already decide the outcome ([`filter`]); the decisions are
//! identical to exhaustive scoring. When the incoming data drifts away from
//! what the model has seen, [`drift`] retrains it incrementally.
//!
//! ```
//! use clad::net::{train, ModelConfig};
//! use clad::scoring::score_all;
//! use clad::stream::{build_sequences, StreamConfig};
//! use clad::synth::synth_stream;
//!
//! let stream = StreamConfig { segments: 120, d1: 8, k: 1, extra_channels: 1, q: 3, ..Default::default() };
//! let segments = synth_stream(&stream)?;
//! let windows = build_sequences(&segments, stream.q)?;
//! let model = ModelConfig { d1: 8, d2: stream.d2(), q: 3, h1: 4, h2: 4, max_epoch: 5, ..Default::default() };
//! let (params, report) = train(&windows, &model)?;
//! let scores = score_all(&params, &windows, model.omega)?;
//! assert_eq!(scores.len(), windows.len());
//! assert!(report.selected().train_loss <= report.train_loss[0]);
//! # Ok::<(), clad::Error>(())
//! ```

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod divergence;
pub mod drift;
pub mod error;
pub mod filter;
pub mod io;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod scoring;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};
