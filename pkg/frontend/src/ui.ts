// DOM layer: renders the dialogue around StudioState. Interaction flows one
// way (events -> state methods -> rerender), no client-side persistence.

import { PatternRecord } from "./api.js";
import { hsvToCss } from "./color.js";
import { StudioState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className = "",
    text = "",
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text) node.textContent = text;
    return node;
}

export class StudioView {
    private chipsBox: HTMLElement;
    private stage: HTMLElement;
    private historyBox: HTMLElement;
    private boardBox: HTMLElement;
    private status: HTMLElement;
    private alphaSlider: HTMLInputElement;
    private optimalToggle: HTMLInputElement;

    constructor(private state: StudioState, private root: HTMLElement) {
        root.innerHTML = "";
        const header = el("header", "toolbar");
        root.appendChild(header);

        const title = el("h1", "", "colorwai studio");
        header.appendChild(title);

        const methodSelect = el("select", "method-select");
        for (const m of ["shapleyvec", "interfacegan", "stylespace"]) {
            const opt = el("option", "", m);
            opt.setAttribute("value", m);
            methodSelect.appendChild(opt);
        }
        methodSelect.value = this.state.method;
        methodSelect.addEventListener("change", () => {
            this.state.method = methodSelect.value;
        });
        header.appendChild(methodSelect);

        this.optimalToggle = el("input") as HTMLInputElement;
        this.optimalToggle.type = "checkbox";
        this.optimalToggle.checked = this.state.alpha === "optimal";
        this.optimalToggle.id = "optimal-toggle";
        const optimalLabel = el("label", "", "optimal α");
        optimalLabel.setAttribute("for", "optimal-toggle");
        header.appendChild(this.optimalToggle);
        header.appendChild(optimalLabel);

        this.alphaSlider = el("input", "alpha-slider") as HTMLInputElement;
        this.alphaSlider.type = "range";
        this.alphaSlider.min = "0";
        this.alphaSlider.max = String(this.state.alphaMax);
        this.alphaSlider.step = "0.05";
        this.alphaSlider.value = "1";
        header.appendChild(this.alphaSlider);

        const syncAlpha = () => {
            if (this.optimalToggle.checked) {
                this.state.setAlpha("optimal");
                this.alphaSlider.disabled = true;
            } else {
                this.alphaSlider.disabled = false;
                this.state.setAlpha(Number(this.alphaSlider.value));
            }
        };
        this.optimalToggle.addEventListener("change", syncAlpha);
        this.alphaSlider.addEventListener("input", syncAlpha);
        syncAlpha();

        const genButton = el("button", "generate", "new pattern");
        genButton.addEventListener("click", () => {
            void this.generateRandom();
        });
        header.appendChild(genButton);

        this.status = el("div", "status");
        header.appendChild(this.status);

        this.chipsBox = el("div", "chips");
        root.appendChild(this.chipsBox);
        this.stage = el("div", "stage");
        root.appendChild(this.stage);
        this.historyBox = el("div", "history");
        root.appendChild(this.historyBox);
        this.boardBox = el("div", "board");
        root.appendChild(this.boardBox);
    }

    renderChips(): void {
        this.chipsBox.innerHTML = "";
        for (const entry of this.state.chips) {
            const chip = el("button", "chip");
            chip.title = `${entry.name} (#${entry.id})`;
            chip.dataset.colorId = String(entry.id);
            chip.style.background = hsvToCss(entry.hsv[0], entry.hsv[1], entry.hsv[2]);
            chip.addEventListener("click", () => {
                void this.requestColorway(entry.id);
            });
            this.chipsBox.appendChild(chip);
        }
    }

    async generateRandom(): Promise<void> {
        const seed = Math.floor(Math.random() * 1_000_000);
        await this.state.generate(seed);
        this.renderStage();
    }

    async requestColorway(colorId: number): Promise<void> {
        if (!this.state.activePattern) {
            this.note("generate a pattern first");
            return;
        }
        this.note("thinking…");
        try {
            await this.state.requestColorway(colorId);
            this.note("");
        } catch (err) {
            this.note(err instanceof Error ? err.message : String(err));
        }
        this.renderStage();
        this.renderHistory();
    }

    private patternCard(record: PatternRecord, label: string): HTMLElement {
        const card = el("div", "card");
        const img = el("img") as HTMLImageElement;
        img.src = this.state.api.imageUrl(record.id);
        img.width = 192;
        img.height = 192;
        card.appendChild(img);
        const name = this.state.chips[record.color_id]?.name ?? `#${record.color_id}`;
        card.appendChild(el("div", "caption", `${label}: ${name}`));
        if (record.ssim !== undefined) {
            card.appendChild(el("div", "ssim-badge", `ssim ${record.ssim.toFixed(2)}`));
        }
        if (record.warnings?.length) {
            card.appendChild(el("div", "warn", record.warnings.join(", ")));
        }
        return card;
    }

    renderStage(): void {
        this.stage.innerHTML = "";
        if (this.state.activePattern) {
            this.stage.appendChild(this.patternCard(this.state.activePattern, "original"));
        }
        const last = this.state.lastResult();
        if (last) {
            this.stage.appendChild(this.patternCard(last, "result"));
            const pinButton = el("button", "pin", "pin to board");
            pinButton.addEventListener("click", () => {
                if (!this.state.pin(last)) {
                    this.note("board is full");
                    return;
                }
                void this.state.saveBoard().then(() => this.renderBoard());
            });
            this.stage.appendChild(pinButton);
        }
    }

    renderHistory(): void {
        this.historyBox.innerHTML = "";
        for (const step of this.state.history) {
            const item = el("div", "history-item");
            const img = el("img") as HTMLImageElement;
            img.src = this.state.api.imageUrl(step.result.id);
            img.width = 48;
            img.height = 48;
            item.appendChild(img);
            item.appendChild(el("span", "", `α=${step.request.alpha}`));
            this.historyBox.appendChild(item);
        }
    }

    renderBoard(): void {
        this.boardBox.innerHTML = "";
        this.boardBox.appendChild(el("h2", "", this.state.boardName));
        const tiles = el("div", "tiles");
        for (const pin of this.state.boardDraft) {
            const img = el("img", "tile") as HTMLImageElement;
            img.src = this.state.api.imageUrl(pin.pattern_id);
            img.width = 96;
            img.height = 96;
            tiles.appendChild(img);
        }
        this.boardBox.appendChild(tiles);
        if (this.state.boardId) {
            const link = el("a", "export", "export contact sheet");
            (link as HTMLAnchorElement).href = this.state.api.boardExportUrl(this.state.boardId);
            this.boardBox.appendChild(link);
        }
    }

    note(text: string): void {
        this.status.textContent = text;
    }

    renderAll(): void {
        this.renderChips();
        this.renderStage();
        this.renderHistory();
        this.renderBoard();
    }
}
