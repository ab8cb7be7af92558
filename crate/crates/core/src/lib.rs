pub mod cli;
pub mod corpus;
pub mod keywords;
pub mod metrics;
pub mod ngram;
pub mod patterns;
pub mod report;
pub mod template;
