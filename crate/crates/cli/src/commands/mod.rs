pub mod bench;
pub mod codebook;
pub mod gen_cmd;
pub mod index;
pub mod search_cmd;
pub mod validate;
