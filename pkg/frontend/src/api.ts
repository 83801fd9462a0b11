// Typed client for the studio HTTP API. All state lives on the server;
// the client only shuttles JSON and image URLs.

export interface CodebookEntry {
    id: number;
    name: string;
    lab: [number, number, number];
    hsv: [number, number, number];
}

export interface Codebook {
    version: number;
    K: number;
    entries: CodebookEntry[];
}

export interface BackendInfo {
    id: string;
    kind: string;
    ready: boolean;
    space_tag: string;
    resolution: number;
    alpha_max: number;
}

export interface PatternRecord {
    id: string;
    backend: string;
    seed: number;
    color_id: number;
    image: string;
    created_at: string;
    request: ColorwayRequestEcho | null;
    achieved_color?: number;
    ssim?: number;
    warnings?: string[];
}

export interface ColorwayRequestEcho {
    pattern_id: string;
    color_id: number;
    method: string;
    alpha: number | "optimal";
    backend: string;
}

export interface BoardPin {
    pattern_id: string;
    request: ColorwayRequestEcho | null;
}

export interface Board {
    id: string;
    name: string;
    pinned: BoardPin[];
    created_at?: string;
    updated_at?: string;
}

export interface JobStatus {
    id: string;
    kind: string;
    state: "queued" | "running" | "done" | "error";
    progress: number;
    result: Record<string, unknown> | null;
    error: string | null;
}

export class ApiError extends Error {
    constructor(public status: number, detail: string) {
        super(detail);
    }
}

export class ApiClient {
    constructor(private base: string = "") {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const res = await fetch(this.base + path, {
            headers: { "content-type": "application/json" },
            ...init,
        });
        if (!res.ok) {
            let detail = res.statusText;
            try {
                const body = await res.json();
                detail = body.detail ?? detail;
            } catch {
                // non-JSON error body: keep the status text
            }
            throw new ApiError(res.status, detail);
        }
        return res.json() as Promise<T>;
    }

    backends(): Promise<BackendInfo[]> {
        return this.request("/api/backends");
    }

    codebook(): Promise<Codebook> {
        return this.request("/api/codebook");
    }

    createPattern(backend: string, seed: number): Promise<PatternRecord> {
        return this.request("/api/patterns", {
            method: "POST",
            body: JSON.stringify({ backend, seed }),
        });
    }

    getPattern(id: string): Promise<PatternRecord> {
        return this.request(`/api/patterns/${id}`);
    }

    imageUrl(id: string): string {
        return `${this.base}/api/patterns/${id}/image.png`;
    }

    createColorway(
        patternId: string,
        colorId: number,
        method: string,
        alpha: number | "optimal",
    ): Promise<PatternRecord> {
        return this.request(`/api/patterns/${patternId}/colorway`, {
            method: "POST",
            body: JSON.stringify({ color_id: colorId, method, alpha }),
        });
    }

    listBoards(): Promise<Board[]> {
        return this.request("/api/boards");
    }

    getBoard(id: string): Promise<Board> {
        return this.request(`/api/boards/${id}`);
    }

    createBoard(name: string, pinned: BoardPin[]): Promise<Board> {
        return this.request("/api/boards", {
            method: "POST",
            body: JSON.stringify({ name, pinned }),
        });
    }

    putBoard(board: Board): Promise<Board> {
        return this.request(`/api/boards/${board.id}`, {
            method: "PUT",
            body: JSON.stringify({ name: board.name, pinned: board.pinned }),
        });
    }

    boardExportUrl(id: string): string {
        return `${this.base}/api/boards/${id}/export.png`;
    }

    submitFit(backend: string, method: string, params: Record<string, unknown> = {}): Promise<{ job_id: string }> {
        return this.request("/api/jobs/fit", {
            method: "POST",
            body: JSON.stringify({ backend, method, params }),
        });
    }

    jobStatus(id: string): Promise<JobStatus> {
        return this.request(`/api/jobs/${id}`);
    }
}
