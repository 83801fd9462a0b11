// @vitest-environment happy-dom
//
// End-to-end acceptance against the real service: the workspace is prepared
// through the CLI, the service is spawned, and the UI talks to it over HTTP.

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { cssToRgb, hsvToCss, rgbToHue } from "../src/color.js";
import { StudioState } from "../src/state.js";
import { StudioView } from "../src/ui.js";

const PORT = Number(process.env.STUDIO_TEST_PORT ?? 8891);
const BASE = `http://127.0.0.1:${PORT}`;
const CLI = process.env.COLORWAI_BIN ?? "colorwai";

let service: ChildProcess | null = null;
let workspace: string;

function cli(...args: string[]): void {
    const result = spawnSync(CLI, ["--workspace", workspace, ...args], {
        encoding: "utf-8",
        timeout: 240_000,
    });
    if (result.status !== 0) {
        throw new Error(`colorwai ${args[0]} failed: ${result.stderr}\n${result.stdout}`);
    }
}

async function waitForService(): Promise<void> {
    let lastError = "";
    for (let i = 0; i < 100; i++) {
        try {
            const res = await fetch(`${BASE}/api/backends`);
            if (res.ok) return;
            lastError = `status ${res.status}`;
        } catch (err) {
            lastError = err instanceof Error ? `${err.message} ${err.cause ?? ""}` : String(err);
        }
        await new Promise((resolve) => setTimeout(resolve, 250));
    }
    throw new Error(`service did not come up: ${lastError}`);
}

beforeAll(async () => {
    workspace = mkdtempSync(join(tmpdir(), "colorwai-ui-"));
    cli("build-codebook", "--n", "200", "--k", "19");
    cli("couple", "--n", "400", "--seed", "0");
    cli("fit", "--method", "shapleyvec", "--explanation", "0.5");
    service = spawn(CLI, ["--workspace", workspace, "serve", "--port", String(PORT)], {
        stdio: "ignore",
    });
    await waitForService();
}, 300_000);

afterAll(() => {
    service?.kill();
});

describe("studio flow against the live service", () => {
    it("loads exactly 19 color chips", async () => {
        const state = new StudioState(new ApiClient(BASE));
        await state.init();
        expect(state.chips).toHaveLength(19);

        const root = document.createElement("div");
        document.body.appendChild(root);
        const view = new StudioView(state, root);
        view.renderAll();
        expect(root.querySelectorAll(".chip")).toHaveLength(19);
    });

    it("completes a colorway whose achieved color matches the server annotation", async () => {
        const state = new StudioState(new ApiClient(BASE));
        await state.init();
        await state.generate(424242);
        const target = (state.activePattern!.color_id + 3) % 19;
        state.setAlpha(1.5);
        const step = await state.requestColorway(target);

        expect(step.result.achieved_color).toBeDefined();
        // the achieved color is the server-side annotation of the rendered
        // image; the persisted record must carry the same id
        const persisted = await state.api.getPattern(step.result.id);
        expect(persisted.color_id).toBe(step.result.achieved_color);
        expect(step.result.ssim).toBeGreaterThan(-1);
        expect(state.history).toHaveLength(1);
    });

    it("keeps a pinned 6-item board across a full page reload", async () => {
        const state = new StudioState(new ApiClient(BASE));
        await state.init();
        await state.generate(777);
        for (let i = 0; i < 6; i++) {
            state.setAlpha(0.5 + 0.25 * i);
            const step = await state.requestColorway(i % 19);
            expect(state.pin(step.result)).toBe(true);
        }
        const board = await state.saveBoard();
        expect(board.pinned).toHaveLength(6);

        // a reload is a fresh state object that only knows the server
        const reloaded = new StudioState(new ApiClient(BASE));
        await reloaded.init();
        const boards = await reloaded.api.listBoards();
        const mine = boards.find((b) => b.id === board.id);
        expect(mine).toBeDefined();
        await reloaded.loadBoard(board.id);
        expect(reloaded.boardDraft).toHaveLength(6);
        expect(reloaded.boardDraft.map((p) => p.pattern_id))
            .toEqual(state.boardDraft.map((p) => p.pattern_id));
    });

    it("renders swatch hues within one degree of server HSV", async () => {
        const state = new StudioState(new ApiClient(BASE));
        await state.init();
        // 8-bit swatch quantization shifts hue by up to 60/(255*chroma)
        // degrees, so the parity check uses the three strongest chips
        const chips = [...state.chips]
            .sort((a, b) => b.hsv[1] * b.hsv[2] - a.hsv[1] * a.hsv[2])
            .slice(0, 3);
        expect(chips.length).toBe(3);
        for (const chip of chips) {
            const css = hsvToCss(chip.hsv[0], chip.hsv[1], chip.hsv[2]);
            const [r, g, b] = cssToRgb(css);
            const hue = rgbToHue(r, g, b);
            const diff = Math.min(Math.abs(hue - chip.hsv[0]), 360 - Math.abs(hue - chip.hsv[0]));
            expect(diff).toBeLessThan(1.0);
        }
    });
});
