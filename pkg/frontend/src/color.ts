// Swatch color math. Mirrors the server's hue-sector hsv->rgb conversion so
// displayed chips match the codebook exactly (parity-tested against the API).

export function hsvToRgb(h: number, s: number, v: number): [number, number, number] {
    const hh = (((h % 360) + 360) % 360) / 60;
    const c = v * s;
    const x = c * (1 - Math.abs((hh % 2) - 1));
    const m = v - c;
    const sector = Math.floor(hh) % 6;
    const table: [number, number, number][] = [
        [c, x, 0],
        [x, c, 0],
        [0, c, x],
        [0, x, c],
        [x, 0, c],
        [c, 0, x],
    ];
    const [r, g, b] = table[sector];
    return [r + m, g + m, b + m];
}

export function rgbToHue(r: number, g: number, b: number): number {
    const v = Math.max(r, g, b);
    const delta = v - Math.min(r, g, b);
    if (delta === 0) return 0;
    let h: number;
    if (v === r) {
        h = ((g - b) / delta) % 6;
        if (h < 0) h += 6;
    } else if (v === g) {
        h = (b - r) / delta + 2;
    } else {
        h = (r - g) / delta + 4;
    }
    return h * 60;
}

export function hsvToCss(h: number, s: number, v: number): string {
    const [r, g, b] = hsvToRgb(h, s, v);
    const to255 = (u: number) => Math.max(0, Math.min(255, Math.floor(u * 255 + 0.5)));
    return `rgb(${to255(r)}, ${to255(g)}, ${to255(b)})`;
}

export function cssToRgb(css: string): [number, number, number] {
    const match = css.match(/rgb\((\d+),\s*(\d+),\s*(\d+)\)/);
    if (!match) throw new Error(`not an rgb() string: ${css}`);
    return [Number(match[1]) / 255, Number(match[2]) / 255, Number(match[3]) / 255];
}
