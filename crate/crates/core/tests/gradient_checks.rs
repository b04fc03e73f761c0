mod common;
use common::gradcheck;

#[test]
fn conv_5x5x2_to_2_filters() {
    gradcheck::conv_5x5x2_to_2_filters();
}

#[test]
fn maxpool_4x4() {
    gradcheck::maxpool_4x4();
}

#[test]
fn global_maxpool_and_leaky() {
    gradcheck::global_maxpool_and_leaky();
}

#[test]
fn dense_3_to_2_with_mse() {
    gradcheck::dense_3_to_2_with_mse();
}

#[test]
fn single_weight_dense_mse() {
    gradcheck::single_weight_dense_mse();
}

#[test]
fn concatenation() {
    gradcheck::concatenation();
}

#[test]
fn fire_module() {
    gradcheck::fire_module();
}

#[test]
fn reduced_prosqn_every_parameter() {
    gradcheck::reduced_prosqn_every_parameter();
}
