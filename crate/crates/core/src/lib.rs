pub mod data;
pub mod error;
pub mod linalg;
pub mod llm;
pub mod metrics;
pub mod profile;
pub mod prompt;
pub mod report;
pub mod sampler;

pub use error::{Error, Result};

#[cfg(doctest)]
mod booktest {
    macro_rules! booktest {
        ($i:ident) => {
            #[doc = include_str!(concat!("../../../book/src/", stringify!($i), ".md"))]
            mod $i {}
        };
    }
    booktest!(introduction);
    booktest!(data);
    booktest!(profiling);
    booktest!(prompts);
    booktest!(generation);
    booktest!(metrics);
    booktest!(cli);
}
