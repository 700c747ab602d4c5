#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| mer_fuzz_checks::dataset_csv(data));
