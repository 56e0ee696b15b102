//! Montages, rank scatter plots and score CSVs.
//!
//! Every renderer is a pure function of its input: fixed font, fixed
//! palette, no timestamps.

mod csv;
mod font;
mod montage;
mod scatter;

pub use self::csv::{parse_scores_csv, read_scores_csv, scores_csv_bytes, write_scores_csv, ScoreRow, SCORES_HEADER};
pub use montage::{render_montage, Montage, MontageLayout, RgbImage, LABEL_RGB, MAX_LABEL_LINES};
pub use scatter::{render_scatter, scatter_svg, RankScatter, Series};
