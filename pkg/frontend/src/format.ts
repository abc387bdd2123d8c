/** 0.6516 -> "65.16 %"; always two decimals. */
export function formatPercent(score: number): string {
  return `${(score * 100).toFixed(2)} %`;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}
