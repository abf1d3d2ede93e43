pub mod gf2;
pub mod codes;
pub mod noise;
pub mod bp;
pub mod osd;
pub mod gdg;
pub mod window;
pub mod harness;
