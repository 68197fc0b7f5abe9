"""Exercise the Python bindings end to end on a tiny dataset."""

import math

import mirrorglass as mg


def main():
    stimuli = mg.generate_dataset(4, size=64, seed=3, externals=1)
    assert len(stimuli) == 9
    assert {s.material for s in stimuli} == {"mirror", "glass", "unknown"}
    img = stimuli[0].image
    assert (img.width, img.height) == (64, 64)
    assert len(img.to_rgb8()) == 64 * 64 * 3

    # Normal incidence on glass: ((n - 1) / (n + 1))^2 = 0.04 for n = 1.5
    r, t = mg.fresnel_split([0.0, 0.0, -1.0], [0.0, 0.0, 1.0], 1.5)
    assert abs(r - 0.04) < 1e-9 and abs(r + t - 1.0) < 1e-12

    assert len(mg.color_hist(img)) == 8
    ps = mg.PsExtractor(64).extract(img)
    assert len(ps) > 100 and all(math.isfinite(v) for v in ps)

    names = [s.image_id for s in stimuli]
    scores = [mg.color_hist(s.image)[0] for s in stimuli]
    rdm = mg.Rdm.from_scores(names, scores)
    assert rdm.n == 9 and rdm.matrix()[0][0] == 0.0
    assert abs(rdm.correlate(rdm) - 1.0) < 1e-12
    assert len(rdm.mds(2)["coords"]) == 9

    t, df, p = mg.ttest([2, 3, 4, 5, 9], [1, 2, 3, 4, 5], paired=True)
    assert df == 4 and abs(t - 8 / 3) < 1e-9 and 0 < p < 0.1

    assert [mg.bin_assign(x) for x in (0.0, 0.5, 1.0)] == [1, 3, 5]
    try:
        mg.bin_assign(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range score accepted")

    run = mg.simulate_funnel("desk", seed=1)
    assert run["counts"]["total"] == 45
    assert run["set"]["per_bin"] == [9] * 5

    curve = mg.toy_search(3, 12, seed=11)
    assert len(curve) == 12 and curve == sorted(curve)

    print("smoke test ok:", mg.__version__)


if __name__ == "__main__":
    main()
