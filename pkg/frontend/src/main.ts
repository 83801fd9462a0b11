import { ApiClient } from "./api.js";
import { StudioState } from "./state.js";
import { StudioView } from "./ui.js";

async function boot(): Promise<void> {
    const root = document.getElementById("app");
    if (!root) throw new Error("missing #app mount point");
    const state = new StudioState(new ApiClient(""));
    const view = new StudioView(state, root);
    await state.init();
    view.renderAll();

    // restore the most recent board, if any: the page is stateless
    const boards = await state.api.listBoards();
    if (boards.length) {
        await state.loadBoard(boards[boards.length - 1].id);
        view.renderBoard();
    }
}

void boot();
