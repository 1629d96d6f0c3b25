pub mod base;
pub mod builtins;
pub mod engine;
pub mod formula;
pub mod oracle;
pub mod patterns;
pub mod regular;
pub mod relation;
pub mod relext;
pub mod spanners;
pub mod splog;
pub mod word;
