import pytest

from ncvqvae.config import PROFILES, config_from_dict, load_config, make_config, save_config


def test_defaults():
    cfg = make_config()
    assert cfg.tokenizer.codebook_size == 32 and cfg.tokenizer.code_dim == 64
    assert cfg.tokenizer.decay == 0.9
    assert cfg.stage1.batch_size == 128 and cfg.stage2.batch_size == 256
    assert cfg.stage1.epochs == 1000 and cfg.stage1.lr == 1e-3
    assert cfg.prior.T_steps == 10
    assert cfg.ssl.method == "barlow_twins"


def test_desk_profile():
    cfg = make_config(profile="desk")
    assert cfg.stage1.epochs == 200 and cfg.profile == "desk"
    assert set(PROFILES) == {"full", "desk"}
    with pytest.raises(KeyError):
        make_config(profile="laptop")


def test_no_ssl_forces_zeta_zero():
    assert make_config({"ssl": {"method": "none"}}).tokenizer.zeta == 0.0
    assert make_config().tokenizer.zeta == 1.0


@pytest.mark.parametrize(
    "method, aug",
    [("none", "warp_resize")] + [(m, a) for m in ("barlow_twins", "vibcreg") for a in ("warp_resize", "slice_shuffle", "gaussian")],
)
def test_experiment_grid_expressible(method, aug):
    cfg = make_config({"ssl": {"method": method}, "augmentation": {"kind": aug}})
    assert (cfg.ssl.method, cfg.augmentation.kind) == (method, aug)


def test_unknown_keys_rejected():
    with pytest.raises(KeyError, match="tokenizer"):
        make_config({"tokenizer": {"codebook": 3}})
    with pytest.raises(KeyError):
        make_config({"learning_rate": 1})


def test_yaml_round_trip(tmp_path):
    cfg = make_config({"seed": 4, "ssl": {"method": "vibcreg"}, "eval": {"feature_extractor": {"channels": [4, 4, 4]}}})
    save_config(cfg, tmp_path / "c.yaml")
    back = load_config(tmp_path / "c.yaml")
    assert back.to_dict() == cfg.to_dict()
    assert back.config_hash == cfg.config_hash
    assert config_from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_hashes():
    a = make_config({"out_dir": "x", "data_root": "/a"})
    b = make_config({"out_dir": "y", "data_root": "/b"})
    assert a.config_hash == b.config_hash
    c = make_config({"prior": {"layers": 2}})
    assert c.config_hash != a.config_hash
    assert c.stage1_hash == a.stage1_hash
    assert make_config({"tokenizer": {"hidden": 32}}).stage1_hash != a.stage1_hash
