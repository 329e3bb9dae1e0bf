"""
Report Table Builder

集計結果（summary.csv / utterances.csv）から表示用の表を組み立てます。
"""

import csv
import io
from typing import Dict, List, Sequence

from .export import finite
from .models import SummaryCell, UtteranceCell

ALGORITHM_LABELS: Dict[str, str] = {
    'phri': 'pHRI',
    'masked': 'Masked pHRI',
    'quicklap': 'QuickLAP',
    'language_only': 'Language only',
}

FORMATS = ('markdown', 'csv')


def _ordered(values) -> list:
    return list(dict.fromkeys(values))


def _label(algorithm: str) -> str:
    return ALGORITHM_LABELS.get(algorithm, algorithm)


def _mean_sem(mean: float, sem: float) -> str:
    if not finite(mean):
        return '-'
    return f"{mean:.4f} ± {sem:.4f}"


class TableBuilder:
    """結果表のビルダークラス"""

    @staticmethod
    def summary_markdown(cells: Sequence[SummaryCell]) -> str:
        """シナリオ × アルゴリズムの表（平均 ± SEM）

        Args:
            cells: summary.csv の行

        Returns:
            str: Markdownの表
        """
        scenarios = _ordered(c.scenario for c in cells)
        algorithms = _ordered(c.algorithm for c in cells)
        lookup = {(c.scenario, c.algorithm): c for c in cells}

        lines = [
            '| Scenario | ' + ' | '.join(_label(a) for a in algorithms) + ' |',
            '|---|' + '---|' * len(algorithms),
        ]
        for scenario in scenarios:
            values = []
            for algorithm in algorithms:
                cell = lookup.get((scenario, algorithm))
                values.append('-' if cell is None else _mean_sem(cell.mean_nmse, cell.sem))
            lines.append(f"| {scenario} | " + ' | '.join(values) + ' |')
        return '\n'.join(lines)

    @staticmethod
    def utterance_markdown(cells: Sequence[UtteranceCell]) -> str:
        """発話ごとの表（シナリオごとに1つ）

        Args:
            cells: utterances.csv の行

        Returns:
            str: Markdownの表（シナリオごとに見出し付き）
        """
        sections = []
        for scenario in _ordered(c.scenario for c in cells):
            rows = [c for c in cells if c.scenario == scenario]
            algorithms = _ordered(c.algorithm for c in rows)
            lookup = {(c.utterance, c.algorithm): c for c in rows}
            lines = [
                f"### {scenario}",
                '',
                '| Utterance | ' + ' | '.join(_label(a) for a in algorithms) + ' |',
                '|---|' + '---|' * len(algorithms),
            ]
            for utterance in _ordered(c.utterance for c in rows):
                values = []
                for algorithm in algorithms:
                    cell = lookup.get((utterance, algorithm))
                    values.append('-' if cell is None else _mean_sem(cell.mean_nmse, cell.sem))
                lines.append(f"| {utterance} | " + ' | '.join(values) + ' |')
            sections.append('\n'.join(lines))
        return '\n\n'.join(sections)

    @staticmethod
    def summary_csv(cells: Sequence[SummaryCell]) -> str:
        """シナリオ × アルゴリズムの表（CSV、平均とSEMを別列）"""
        scenarios = _ordered(c.scenario for c in cells)
        algorithms = _ordered(c.algorithm for c in cells)
        lookup = {(c.scenario, c.algorithm): c for c in cells}

        header: List[str] = ['scenario']
        for algorithm in algorithms:
            header.extend([f"{algorithm}_mean", f"{algorithm}_sem"])
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        for scenario in scenarios:
            row = [scenario]
            for algorithm in algorithms:
                cell = lookup.get((scenario, algorithm))
                row.extend(['', ''] if cell is None else [f"{cell.mean_nmse:.4f}", f"{cell.sem:.4f}"])
            writer.writerow(row)
        return buffer.getvalue()

    @staticmethod
    def utterance_csv(cells: Sequence[UtteranceCell]) -> str:
        """発話ごとの表（CSV）"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['scenario', 'utterance', 'algorithm', 'mean_nmse', 'sem', 'n'])
        for c in cells:
            writer.writerow([c.scenario, c.utterance, c.algorithm, f"{c.mean_nmse:.4f}", f"{c.sem:.4f}", c.n])
        return buffer.getvalue()

    @staticmethod
    def render(summary: Sequence[SummaryCell], utterances: Sequence[UtteranceCell],
               fmt: str = 'markdown') -> str:
        """両方の表をまとめて出力

        Raises:
            ValueError: 未知のフォーマット
        """
        if fmt == 'markdown':
            parts = ['## Normalized MSE by scenario', '', TableBuilder.summary_markdown(summary)]
            if utterances:
                parts += ['', '## Normalized MSE by utterance', '', TableBuilder.utterance_markdown(utterances)]
            return '\n'.join(parts) + '\n'
        if fmt == 'csv':
            text = TableBuilder.summary_csv(summary)
            if utterances:
                text += '\n' + TableBuilder.utterance_csv(utterances)
            return text
        raise ValueError(f"Unknown report format: {fmt} (expected one of {list(FORMATS)})")
