import pytest

from mmforge.metrics import close_accuracy, exact_accuracy


class TestCloseAccuracy:
    def test_exact_match(self):
        assert close_accuracy(10, 10)

    def test_tolerance_two_at_twenty(self):
        assert close_accuracy(22, 20)
        assert not close_accuracy(23, 20)

    def test_zero_ground_truth(self):
        assert close_accuracy(1, 0)
        assert not close_accuracy(2, 0)

    def test_tolerance_table(self):
        # tolerance = 1 + floor(0.05 * gt): 1 below 20, 2 below 40, ...
        for gt in range(0, 101):
            delta = 1 + gt // 20
            expected_delta = {0: 1, 1: 2, 2: 3, 3: 4, 4: 5, 5: 6}[gt // 20]
            assert delta == expected_delta
            for offset in range(0, delta + 3):
                assert close_accuracy(gt + offset, gt) == (offset <= delta)
                if gt - offset >= 0:
                    assert close_accuracy(gt - offset, gt) == (offset <= delta)

    def test_negative_gt_rejected(self):
        with pytest.raises(ValueError):
            close_accuracy(1, -1)


class TestExactAccuracy:
    def test_basic(self):
        assert exact_accuracy(7, 7)
        assert not exact_accuracy(6, 7)

    def test_batch_mean(self):
        pairs = [(5, 5), (6, 5), (9, 9), (0, 1)]
        mean = sum(exact_accuracy(p, g) for p, g in pairs) / len(pairs)
        assert mean == 0.5
