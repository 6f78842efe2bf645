pub mod duel;
pub mod frame;
pub mod object;
pub mod pse;
pub mod scenario;
pub mod sim;
pub mod worldset;
