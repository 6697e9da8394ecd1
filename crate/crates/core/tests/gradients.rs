mod common;

use atnm::mil::MilVariant;
use atnm::ram::RamVariant;
use common::grad_suite::*;

#[test]
fn linear_layer_and_activations() {
    let e = linear_and_activations();
    assert!(e < LINEAR_TOL, "{e:e}");
}

#[test]
fn recurrent_cells_over_several_steps() {
    let e = recurrent_cells();
    assert!(e < RECURRENT_TOL, "{e:e}");
}

#[test]
fn rectangular_convolution_with_max_pool() {
    let e = rect_conv();
    assert!(e < RECURRENT_TOL, "{e:e}");
}

#[test]
fn patch_embedding_mlp() {
    let e = patch_embedding();
    assert!(e < RECURRENT_TOL, "{e:e}");
}

#[test]
fn attention_mic_family_end_to_end() {
    for v in [MilVariant::AttTF, MilVariant::AttTFid, MilVariant::AttT, MilVariant::Fc] {
        let e = mil_family(v);
        assert!(e < END_TO_END_TOL, "{v:?}: {e:e}");
    }
}

#[test]
fn recurrent_attention_family_with_frozen_locations() {
    for v in [RamVariant::Sr16, RamVariant::Sr16Fl, RamVariant::Ram16Rnn, RamVariant::Ram16Gru] {
        let e = ram_family(v);
        assert!(e < END_TO_END_TOL, "{v:?}: {e:e}");
    }
}
