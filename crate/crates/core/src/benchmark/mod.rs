//! LLM relation-prediction benchmark: test-set sampling, prompts,
//! providers, response parsing and scoring.

pub mod harness;
pub mod metrics;
pub mod parser;
pub mod provider;
pub mod render;
pub mod split;

pub use harness::{run_benchmark, write_run, BenchConfig, BenchmarkRun, ResponseRecord};
pub use metrics::{score_outcomes, score_predictions, BenchmarkMetrics, MetricsError, Outcome};
pub use parser::{parse_response, MatchedBy, ParsedAnswer};
pub use provider::{CompletionRequest, Provider, ProviderError};
pub use render::{render_fact, render_prompt, render_prompt_with, render_query, Candidates, Mode, PromptInstance, RenderOptions};
pub use split::{build_test_set, read_test_set, write_test_set};
