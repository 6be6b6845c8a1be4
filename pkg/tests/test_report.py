import json

import pytest

from mobsched.engine import CampaignConfig, run_campaign
from mobsched.report import ReportError, chart_data, read_rounds, render_report


@pytest.fixture(scope="module")
def campaign_dir(tmp_path_factory):
    from mobsched.simtarget import load_target_spec
    out = tmp_path_factory.mktemp("run")
    run_campaign(CampaignConfig(total_rounds=60, round_budget=200, seed=1),
                 load_target_spec("shallow-magic"), out=out)
    return out


def test_bands_per_round(campaign_dir, tmp_path):
    data = render_report(campaign_dir, tmp_path)
    assert data["rounds"] == 60
    svg = (tmp_path / "objectives.svg").read_text()
    assert svg.count('class="band"') == 60
    assert svg.count('class="series"') == 3


def test_shares_sum_to_100(campaign_dir):
    data = chart_data(read_rounds(campaign_dir))
    assert abs(sum(data["combination_share"].values()) - 100) <= 0.1
    assert abs(sum(data["state_share"].values()) - 100) <= 0.1


def test_bar_values_match_csv(campaign_dir, tmp_path):
    data = render_report(campaign_dir, tmp_path)
    masks = [int(r["mask"]) for r in read_rounds(campaign_dir)]
    for m in range(1, 8):
        assert data["combination_share"][str(m)] == pytest.approx(100 * masks.count(m) / 60)
    svg = (tmp_path / "combinations.svg").read_text()
    assert svg.count('class="bar"') == 7
    saved = json.loads((tmp_path / "chart_data.json").read_text())
    assert saved["bands"] == masks


def test_summary_text(campaign_dir, tmp_path):
    render_report(campaign_dir, tmp_path)
    text = (tmp_path / "summary.txt").read_text()
    assert "rounds: 60" in text and "nic_share" in text


def test_empty_campaign(tmp_path):
    from mobsched.simtarget import load_target_spec
    run_campaign(CampaignConfig(total_rounds=0), load_target_spec("shallow-magic"), out=tmp_path)
    data = render_report(tmp_path)
    assert data["rounds"] == 0
    assert all(not v for v in data["series"].values())
    svg = (tmp_path / "objectives.svg").read_text()
    assert 'class="series"' not in svg and 'class="band"' not in svg


def test_missing_csv(tmp_path):
    with pytest.raises(ReportError):
        render_report(tmp_path)
