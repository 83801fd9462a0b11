// StudioState logic against a mocked fetch: dialogue history, board draft,
// and alpha clamping without a live server.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ApiClient, PatternRecord } from "../src/api.js";
import { BOARD_LIMIT, StudioState } from "../src/state.js";

const CODEBOOK = {
    version: 1,
    K: 3,
    entries: [
        { id: 0, name: "red", lab: [50, 60, 40], hsv: [10, 0.8, 0.6] },
        { id: 1, name: "green", lab: [60, -50, 40], hsv: [120, 0.7, 0.7] },
        { id: 2, name: "blue", lab: [40, 10, -50], hsv: [230, 0.6, 0.5] },
    ],
};

const BACKENDS = [
    { id: "texgen", kind: "procedural", ready: true, space_tag: "w-analog", resolution: 64, alpha_max: 3.0 },
];

function pattern(id: string, colorId: number, extra: Partial<PatternRecord> = {}): PatternRecord {
    return {
        id,
        backend: "texgen",
        seed: 1,
        color_id: colorId,
        image: `blobs/${id}.png`,
        created_at: "t",
        request: null,
        ...extra,
    };
}

const boards = new Map<string, { id: string; name: string; pinned: unknown[] }>();

function installFetchMock() {
    let boardCounter = 0;
    vi.stubGlobal("fetch", vi.fn(async (url: string, init?: RequestInit) => {
        const body = init?.body ? JSON.parse(init.body as string) : null;
        const respond = (payload: unknown, status = 200) =>
            new Response(JSON.stringify(payload), { status });

        if (url.endsWith("/api/codebook")) return respond(CODEBOOK);
        if (url.endsWith("/api/backends")) return respond(BACKENDS);
        if (url.endsWith("/api/patterns") && init?.method === "POST") {
            return respond(pattern(`p${body.seed}`, body.seed % 3));
        }
        if (/\/api\/patterns\/[^/]+\/colorway$/.test(url)) {
            const src = url.split("/")[3];
            return respond(pattern(`${src}-cw${body.color_id}`, body.color_id, {
                achieved_color: body.color_id,
                ssim: 0.9,
                request: {
                    pattern_id: src, color_id: body.color_id,
                    method: body.method, alpha: body.alpha, backend: "texgen",
                },
            }));
        }
        if (url.endsWith("/api/boards") && init?.method === "POST") {
            const board = { id: `b${++boardCounter}`, name: body.name, pinned: body.pinned };
            boards.set(board.id, board);
            return respond(board);
        }
        if (/\/api\/boards\/[^/]+$/.test(url) && init?.method === "PUT") {
            const id = url.split("/").pop()!;
            const board = { id, name: body.name, pinned: body.pinned };
            boards.set(id, board);
            return respond(board);
        }
        if (/\/api\/boards\/[^/]+$/.test(url)) {
            const id = url.split("/").pop()!;
            const board = boards.get(id);
            return board ? respond(board) : respond({ detail: "unknown board" }, 404);
        }
        if (url.endsWith("/api/boards")) return respond([...boards.values()]);
        return respond({ detail: `unmocked ${url}` }, 500);
    }));
}

describe("StudioState", () => {
    let state: StudioState;

    beforeEach(async () => {
        boards.clear();
        installFetchMock();
        state = new StudioState(new ApiClient("http://studio"));
        await state.init();
    });

    afterEach(() => {
        vi.unstubAllGlobals();
    });

    it("mirrors the codebook as chips", () => {
        expect(state.chips).toHaveLength(3);
        expect(state.chips[1].name).toBe("green");
        expect(state.alphaMax).toBe(3.0);
    });

    it("keeps an append-only history across requests", async () => {
        await state.generate(5);
        await state.requestColorway(0);
        await state.requestColorway(1);
        await state.requestColorway(2);
        expect(state.history).toHaveLength(3);
        expect(state.history.map((s) => s.request.colorId)).toEqual([0, 1, 2]);
    });

    it("sends alpha optimal in the request body", async () => {
        await state.generate(5);
        state.setAlpha("optimal");
        const step = await state.requestColorway(1);
        expect(step.result.request?.alpha).toBe("optimal");
    });

    it("clamps numeric alpha to the advertised range", () => {
        state.setAlpha(99);
        expect(state.alpha).toBe(3.0);
        state.setAlpha(-1);
        expect(state.alpha).toBe(0);
        state.setAlpha(1.25);
        expect(state.alpha).toBe(1.25);
    });

    it("refuses colorways without an active pattern", async () => {
        await expect(state.requestColorway(0)).rejects.toThrow("no active pattern");
    });

    it("pins up to the board limit", async () => {
        await state.generate(1);
        const step = await state.requestColorway(0);
        for (let i = 0; i < BOARD_LIMIT; i++) {
            expect(state.pin(step.result)).toBe(true);
        }
        expect(state.pin(step.result)).toBe(false);
        expect(state.boardDraft).toHaveLength(BOARD_LIMIT);
    });

    it("persists and reloads boards through the server", async () => {
        await state.generate(2);
        const step = await state.requestColorway(2);
        state.pin(step.result);
        const board = await state.saveBoard();
        expect(board.pinned).toHaveLength(1);

        const fresh = new StudioState(new ApiClient("http://studio"));
        await fresh.init();
        await fresh.loadBoard(board.id);
        expect(fresh.boardDraft).toEqual(state.boardDraft);
        expect(fresh.boardName).toBe(state.boardName);
    });

    it("updates an existing board in place", async () => {
        await state.generate(3);
        const first = await state.requestColorway(0);
        state.pin(first.result);
        const created = await state.saveBoard();
        const second = await state.requestColorway(1);
        state.pin(second.result);
        const updated = await state.saveBoard();
        expect(updated.id).toBe(created.id);
        expect(updated.pinned).toHaveLength(2);
    });
});
