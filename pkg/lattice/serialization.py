"""
NCElement 的逐行文字格式

    n N
    m_1 … m_n re im
    ...

浮點數以 repr（最短可往返表示）輸出，讀回後位元相同。
"""
import os
from typing import List

import numpy as np

from lattice.errors import DimensionMismatchError, NCTorusError
from lattice.nc_element import NCElement, ThetaMatrix


def format_element(a: NCElement) -> str:
    lines: List[str] = [f"{a.n} {a.support_radius}"]
    for point, value in zip(a.points, a.coeffs):
        indices = " ".join(str(int(x)) for x in point)
        lines.append(f"{indices} {repr(float(value.real))} {repr(float(value.imag))}")
    return "\n".join(lines) + "\n"


def parse_element(text: str, theta: ThetaMatrix, source: str = "<string>") -> NCElement:
    rows = [line.strip() for line in text.splitlines()]
    rows = [line for line in rows if line and not line.startswith("#")]
    if not rows:
        raise NCTorusError(f"{source}: 缺少 'n N' 標頭")
    header = rows[0].split()
    if len(header) != 2:
        raise NCTorusError(f"{source}: 標頭必須是 'n N'，收到 '{rows[0]}'")
    n, radius = int(header[0]), int(header[1])
    if n != theta.n:
        raise DimensionMismatchError(f"{source}: 檔案維度 n={n} 與 θ 的 n={theta.n} 不一致")

    points = np.zeros((len(rows) - 1, n), dtype=np.int64)
    coeffs = np.zeros(len(rows) - 1, dtype=np.complex128)
    for i, line in enumerate(rows[1:]):
        fields = line.split()
        if len(fields) != n + 2:
            raise NCTorusError(f"{source}: 第 {i + 2} 筆資料應有 {n + 2} 欄，收到 {len(fields)} 欄")
        points[i] = [int(x) for x in fields[:n]]
        coeffs[i] = complex(float(fields[n]), float(fields[n + 1]))

    element = NCElement.from_arrays(theta, points, coeffs)
    if element.support_radius > radius:
        raise NCTorusError(f"{source}: 支撐半徑 {element.support_radius} 超出標頭宣告的 N={radius}")
    return element


def write_element(path: str, a: NCElement) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_element(a))
    return path


def read_element(path: str, theta: ThetaMatrix) -> NCElement:
    if not os.path.exists(path):
        raise NCTorusError(f"找不到元素檔案 {path}")
    with open(path, "r", encoding="utf-8") as f:
        return parse_element(f.read(), theta, source=path)
