// Session state for the designer dialogue. History is append-only and
// session-scoped; boards persist through the server, so any state here can
// be reconstructed from server data alone.

import {
    ApiClient,
    BackendInfo,
    Board,
    BoardPin,
    Codebook,
    PatternRecord,
} from "./api.js";

export interface DialogueStep {
    request: { colorId: number; method: string; alpha: number | "optimal" };
    result: PatternRecord;
}

export const BOARD_LIMIT = 24;

export class StudioState {
    codebook: Codebook | null = null;
    backends: BackendInfo[] = [];
    activePattern: PatternRecord | null = null;
    history: DialogueStep[] = [];
    method = "shapleyvec";
    backend = "texgen";
    alpha: number | "optimal" = "optimal";
    alphaMax = 3.0;
    boardDraft: BoardPin[] = [];
    boardId: string | null = null;
    boardName = "colorways";
    busy = false;

    constructor(readonly api: ApiClient) {}

    async init(): Promise<void> {
        this.codebook = await this.api.codebook();
        this.backends = await this.api.backends();
        const info = this.backends.find((b) => b.id === this.backend);
        if (info) this.alphaMax = info.alpha_max;
    }

    get chips() {
        return this.codebook?.entries ?? [];
    }

    setAlpha(value: number | "optimal"): void {
        if (typeof value === "number") {
            // clamp to the server-advertised grid range
            this.alpha = Math.max(0, Math.min(this.alphaMax, value));
        } else {
            this.alpha = value;
        }
    }

    async generate(seed: number): Promise<PatternRecord> {
        this.activePattern = await this.api.createPattern(this.backend, seed);
        return this.activePattern;
    }

    async openPattern(id: string): Promise<PatternRecord> {
        this.activePattern = await this.api.getPattern(id);
        return this.activePattern;
    }

    async requestColorway(colorId: number): Promise<DialogueStep> {
        if (!this.activePattern) throw new Error("no active pattern");
        if (this.busy) throw new Error("request already in flight");
        this.busy = true;
        try {
            const result = await this.api.createColorway(
                this.activePattern.id,
                colorId,
                this.method,
                this.alpha,
            );
            const step: DialogueStep = {
                request: { colorId, method: this.method, alpha: this.alpha },
                result,
            };
            this.history.push(step);
            return step;
        } finally {
            this.busy = false;
        }
    }

    lastResult(): PatternRecord | null {
        return this.history.length ? this.history[this.history.length - 1].result : null;
    }

    pin(result: PatternRecord): boolean {
        if (this.boardDraft.length >= BOARD_LIMIT) return false;
        this.boardDraft.push({ pattern_id: result.id, request: result.request });
        return true;
    }

    async saveBoard(): Promise<Board> {
        let board: Board;
        if (this.boardId === null) {
            board = await this.api.createBoard(this.boardName, this.boardDraft);
            this.boardId = board.id;
        } else {
            board = await this.api.putBoard({
                id: this.boardId,
                name: this.boardName,
                pinned: this.boardDraft,
            });
        }
        this.boardDraft = board.pinned;
        return board;
    }

    async loadBoard(id: string): Promise<Board> {
        const board = await this.api.getBoard(id);
        this.boardId = board.id;
        this.boardName = board.name;
        this.boardDraft = board.pinned;
        return board;
    }
}
