pub mod etc_bounds;
pub mod io;
pub mod model;
pub mod sim;
pub mod synthesis;
