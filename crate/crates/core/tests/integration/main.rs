//! Integration suites share one binary so that every suite runs and reports
//! even when another fails.

mod acceptance;
mod coverage;
mod pipeline;
