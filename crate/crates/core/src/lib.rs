//! Synthesis of dialogues that open as chit-chat, detect a user's implicit
//! task-oriented intent, pivot through a transition turn and continue as a
//! task-oriented conversation; plus crowdsourcing export and aggregation.

pub mod backend;
pub mod detect;
pub mod dialogue;
pub mod eval;
pub mod intent;
pub mod pipeline;
pub mod seed;
pub mod selfchat;
pub mod sgd;
pub mod text;
pub mod tod;
pub mod transition;
