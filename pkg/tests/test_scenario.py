import math

import numpy as np
import pytest

from rishwi.errors import ConfigError, ScenarioParseError
from rishwi.scenario import ScenarioFile, build_scenario, default_scenario


def build(text, **kw):
    return build_scenario(ScenarioFile.parse(text, "s.ini"), **kw)


class TestDefaults:
    def test_reference_values(self):
        sc = build("")
        c, g = sc.config, sc.geometry
        assert (c.M, c.N, c.K) == (50, 25, 4)
        assert c.k_r == c.k_u == c.k_b == 0.08
        assert c.p == (1.0,) * 4
        assert c.sigma2 == pytest.approx(10 ** (-13.4), rel=1e-14)
        assert np.allclose(g.mu, 2.5e-6, rtol=1e-15)
        assert g.nu == pytest.approx(1e-3 * 1000 ** -2.5, rel=1e-15)
        assert g.xi[0] == pytest.approx(1e-3 * 988.0**-4, rel=1e-15)
        assert g.xi[1] == pytest.approx(1e-3 * 980.0**-4, rel=1e-15)
        assert g.rho == 10 and np.all(g.epsilon == 1)

    def test_desk_scale(self):
        sc = default_scenario(desk_scale=True)
        assert (sc.config.M, sc.config.N, sc.config.K) == (16, 16, 2)
        assert np.allclose(sc.l_ub, [988, 980])

    def test_file_overrides_desk_scale(self):
        sc = build("[system]\nN = 9\n", desk_scale=True)
        assert (sc.config.M, sc.config.N) == (16, 9)

    def test_random_angles_seeded(self):
        a, b, c = build("", seed=1), build("", seed=1), build("", seed=2)
        assert np.array_equal(a.geometry.psi_a_kr, b.geometry.psi_a_kr)
        assert not np.array_equal(a.geometry.psi_a_kr, c.geometry.psi_a_kr)
        ang = np.concatenate([a.geometry.psi_a_kr, a.geometry.psi_e_kr])
        assert np.all((ang >= 0) & (ang <= 2 * math.pi))
        assert a.describe()["angle_seed"] == "1"

    def test_angle_seed_key_wins(self):
        a = build("[geometry]\nangle_seed = 7\n", seed=1)
        assert np.array_equal(a.geometry.psi_e_kr, build("", seed=7).geometry.psi_e_kr)


class TestFileFormat:
    def test_full_file(self):
        text = """
        # reference-scale setup with explicit angles
        [system]
        M = 16
        N = 9
        K = 2
        p_dbm = 20, 23
        k_r = 0.1   # RIS phase noise
        [geometry]
        l_ub = 900, 950
        angles = explicit
        psi_a_kr = 0.1, 0.2
        psi_e_kr = 0.3
        phi_a_rb = 1
        phi_e_rb = 2
        psi_a_rb = 3
        psi_e_rb = 4
        [ga]
        max_iters = 50
        refine = yes
        seed = 18446744073709551615
        """
        sc = build(text)
        assert sc.config.p == pytest.approx((0.1, 10 ** -0.7))
        assert sc.config.k_r == 0.1 and sc.config.k_u == 0.08
        assert np.allclose(sc.geometry.psi_e_kr, [0.3, 0.3]) and sc.geometry.psi_e_rb == 4
        assert sc.ga.max_iters == 50 and sc.ga.refine and sc.ga.seed == 2**64 - 1
        assert sc.geometry.xi[1] == pytest.approx(1e-3 * 950.0**-4)

    def test_custom_pathloss(self):
        sc = build("[geometry]\nexp_ur = 3\nl_ur = 10\npathloss_ref = 1e-2\n")
        assert np.allclose(sc.geometry.mu, 1e-2 * 10.0**-3)

    @pytest.mark.parametrize("text,line", [
        ("[system]\nM = 4\nbogus = 1\n", 3),
        ("M = 4\n", 1),
        ("[system]\n\n# c\nM 4\n", 4),
        ("[nowhere]\n", 1),
        ("[system\n", 1),
        ("[system]\nM = 4\nM = 9\n", 3),
        ("[system]\nk_r = abc\n", 2),
        ("[system]\nM = 4.5\n", 2),
        ("[geometry]\nangles = sideways\n", 2),
        ("[ga]\nrefine = maybe\n", 2),
        ("[system]\nK = 2\np_dbm = 1, 2, 3\n", 3),
    ])
    def test_parse_errors_carry_line(self, text, line):
        with pytest.raises(ScenarioParseError) as info:
            build(text)
        assert info.value.line == line
        assert str(info.value).startswith(f"s.ini:{line}:")

    def test_l_ub_count_mismatch(self):
        with pytest.raises(ConfigError, match="K=2"):
            build("[system]\nK = 2\n[geometry]\nl_ub = 1, 2, 3\n")

    @pytest.mark.parametrize("text", [
        "[geometry]\nl_rb = -5\n",
        "[system]\nN = 0\n",
        "[system]\nk_r = 2\n",
        "[geometry]\nangles = explicit\n",
        "[ga]\nS_e = 0\n",
    ])
    def test_invalid_values(self, text):
        with pytest.raises(ConfigError):
            build(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            ScenarioFile.load(tmp_path / "none.ini")

    def test_digest_tracks_bytes(self):
        assert ScenarioFile.parse("").digest() != ScenarioFile.parse("\n").digest()
