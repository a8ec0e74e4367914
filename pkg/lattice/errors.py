"""
領域錯誤類別

全部繼承 ValueError：呼叫端若只關心「前置條件不成立」，照舊 except ValueError 即可。
"""


class NCTorusError(ValueError):
    """所有領域錯誤的共同基底"""


class DimensionMismatchError(NCTorusError):
    """θ 與格點維度不一致，或兩個元素的 θ 不相容"""


class SupportOverflowError(NCTorusError):
    """乘積支撐超出最大半徑（策略為 reject 時）"""


class DivergentSeriesError(NCTorusError):
    """Σ⟨m⟩^{-2k} 在 2k ≤ n 時發散"""


class WitnessConstructionError(NCTorusError):
    """k_t = 0，無法建構 sharpness witness"""


class KernelTailError(NCTorusError):
    """週期化截斷的尾項上界超過容忍值"""


class InvalidTimeError(NCTorusError):
    """時間參數不在允許範圍"""


class ConfigError(NCTorusError):
    """設定檔缺鍵、型別錯誤或數值不合法"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"設定鍵 '{key}': {message}")
