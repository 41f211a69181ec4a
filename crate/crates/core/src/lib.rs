pub mod cic;
pub mod contact;
pub mod dhr;
pub mod energy;
pub mod esp;
pub mod generate;
pub mod multipath;
pub mod sim;
pub mod time;
