pub mod cli;
pub mod config;
pub mod cop;
pub mod evolution;
pub mod llm;
pub mod prompts;
pub mod reduction;
pub mod sandbox;
pub mod scripted;
